#include "c2fq/serialize.hpp"

#include <stdexcept>

namespace c2fq {

using nlohmann::json;

std::string bc_variant_name(BcVariant v) {
  return v == BcVariant::margin ? "margin" : "dominance";
}

BcVariant bc_variant_from_name(const std::string& name) {
  if (name == "margin") return BcVariant::margin;
  if (name == "dominance") return BcVariant::dominance;
  throw std::invalid_argument("unknown bc variant \"" + name + "\" (margin, dominance)");
}

std::string select_net_name(SelectNet s) {
  return s == SelectNet::online ? "online" : "target";
}

SelectNet select_net_from_name(const std::string& name) {
  if (name == "online") return SelectNet::online;
  if (name == "target") return SelectNet::target;
  throw std::invalid_argument("unknown select net \"" + name + "\" (online, target)");
}

json eigen_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd eigen_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

void to_json(json& j, const AgentConfig& c) {
  j = json{{"levels", c.levels},
           {"bins", c.bins},
           {"dims", c.dims},
           {"gamma", c.gamma},
           {"tau", c.tau},
           {"n_step", c.n_step},
           {"lambda_rl", c.lambda_rl},
           {"lambda_bc", c.lambda_bc},
           {"margin", c.margin},
           {"exploration_std", c.exploration_std},
           {"bc_variant", bc_variant_name(c.bc_variant)},
           {"action_select_net", select_net_name(c.action_select_net)},
           {"batch_size_each", c.batch_size_each},
           {"lr", c.lr},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed},
           {"num_atoms", c.num_atoms},
           {"v_min", c.v_min},
           {"v_max", c.v_max},
           {"distributional", c.distributional},
           {"encoder_widths", c.encoder_widths},
           {"trunk_widths", c.trunk_widths},
           {"history", c.history},
           {"buffer_capacity", c.buffer_capacity}};
}

void from_json(const json& j, AgentConfig& c) {
  // Missing keys keep their defaults so partial config files stay usable.
  c.levels = j.value("levels", c.levels);
  c.bins = j.value("bins", c.bins);
  c.dims = j.value("dims", c.dims);
  c.gamma = j.value("gamma", c.gamma);
  c.tau = j.value("tau", c.tau);
  c.n_step = j.value("n_step", c.n_step);
  c.lambda_rl = j.value("lambda_rl", c.lambda_rl);
  c.lambda_bc = j.value("lambda_bc", c.lambda_bc);
  c.margin = j.value("margin", c.margin);
  c.exploration_std = j.value("exploration_std", c.exploration_std);
  if (j.contains("bc_variant")) c.bc_variant = bc_variant_from_name(j.at("bc_variant"));
  if (j.contains("action_select_net"))
    c.action_select_net = select_net_from_name(j.at("action_select_net"));
  c.batch_size_each = j.value("batch_size_each", c.batch_size_each);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.num_atoms = j.value("num_atoms", c.num_atoms);
  c.v_min = j.value("v_min", c.v_min);
  c.v_max = j.value("v_max", c.v_max);
  c.distributional = j.value("distributional", c.distributional);
  c.encoder_widths = j.value("encoder_widths", c.encoder_widths);
  c.trunk_widths = j.value("trunk_widths", c.trunk_widths);
  c.history = j.value("history", c.history);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
}

void to_json(json& j, const MetricsRecord& r) {
  j = json{{"step", r.step},
           {"episode", r.episode},
           {"train_success_mean", r.train_success_mean},
           {"eval_success", r.eval_success},
           {"eval_return", r.eval_return},
           {"loss_rl", r.loss_rl},
           {"loss_bc", r.loss_bc},
           {"mean_q", r.mean_q},
           {"wall_seconds", r.wall_seconds},
           {"seed", r.seed}};
}

void from_json(const json& j, MetricsRecord& r) {
  j.at("step").get_to(r.step);
  j.at("episode").get_to(r.episode);
  j.at("train_success_mean").get_to(r.train_success_mean);
  j.at("eval_success").get_to(r.eval_success);
  j.at("eval_return").get_to(r.eval_return);
  j.at("loss_rl").get_to(r.loss_rl);
  j.at("loss_bc").get_to(r.loss_bc);
  j.at("mean_q").get_to(r.mean_q);
  j.at("wall_seconds").get_to(r.wall_seconds);
  j.at("seed").get_to(r.seed);
}

}  // namespace c2fq

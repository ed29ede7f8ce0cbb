#include "c2fq/replay.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace c2fq {

using nlohmann::json;

double Episode::total_return() const {
  double r = 0.0;
  for (const auto& t : transitions) r += t.reward;
  return r;
}

NStepView nstep_return(const Episode& episode, int t, int n, double gamma) {
  const int len = static_cast<int>(episode.size());
  if (t < 0 || t >= len) throw std::out_of_range("nstep_return: t out of range");
  if (n < 1) throw std::invalid_argument("nstep_return: n must be >= 1");

  const int m = std::min(n, len - t);
  NStepView view;
  double g = 1.0;
  for (int k = 0; k < m; ++k) {
    view.return_ += g * episode.transitions[t + k].reward;
    g *= gamma;
  }
  const Transition& last = episode.transitions[t + m - 1];
  view.bootstrap_obs = last.next_obs;
  view.terminal = last.done;
  view.discount = view.terminal ? 0.0 : g;
  return view;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int n_step, double gamma, std::uint64_t seed,
                           bool demo_buffer)
    : capacity_(capacity), n_step_(n_step), gamma_(gamma), demo_buffer_(demo_buffer), rng_(seed) {
  if (n_step < 1) throw std::invalid_argument("replay buffer: n_step must be >= 1");
}

void ReplayBuffer::push_episode(const Episode& episode) {
  for (int t = 0; t < static_cast<int>(episode.size()); ++t) {
    const Transition& tr = episode.transitions[t];
    BatchItem item;
    item.obs = tr.obs;
    item.action = tr.action;
    item.reward = tr.reward;
    item.done = tr.done;
    item.is_demo = demo_buffer_;
    NStepView v = nstep_return(episode, t, n_step_, gamma_);
    item.nstep_return = v.return_;
    item.bootstrap_obs = std::move(v.bootstrap_obs);
    item.nstep_discount = v.discount;

    if (capacity_ == 0 || items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[write_pos_] = std::move(item);  // FIFO eviction
      write_pos_ = (write_pos_ + 1) % capacity_;
    }
  }
}

std::vector<BatchItem> ReplayBuffer::sample(int count) {
  if (count < 0) throw std::invalid_argument("replay buffer: negative sample count");
  if (count == 0) return {};
  if (items_.empty()) throw std::runtime_error("buffer underflow");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<BatchItem> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(items_[pick(rng_)]);
  return out;
}

std::vector<BatchItem> sample_batch(ReplayBuffer& online_buffer, ReplayBuffer& demo_buffer,
                                    int batch_size_each) {
  std::vector<BatchItem> batch = online_buffer.sample(batch_size_each);
  std::vector<BatchItem> demo = demo_buffer.sample(batch_size_each);
  batch.insert(batch.end(), std::make_move_iterator(demo.begin()),
               std::make_move_iterator(demo.end()));
  return batch;
}

void relabel_success(const Episode& episode, ReplayBuffer& demo_buffer) {
  if (episode.success) demo_buffer.push_episode(episode);
}

ActionScaler ActionScaler::identity(int dims) {
  ActionScaler s;
  s.low = Eigen::VectorXd::Constant(dims, -1.0);
  s.high = Eigen::VectorXd::Constant(dims, 1.0);
  return s;
}

Eigen::VectorXd ActionScaler::apply(const Eigen::VectorXd& action) const {
  Eigen::VectorXd out(action.size());
  for (Eigen::Index n = 0; n < action.size(); ++n) {
    out[n] = degenerate(n) ? 0.0 : 2.0 * (action[n] - low[n]) / (high[n] - low[n]) - 1.0;
  }
  return out;
}

Eigen::VectorXd ActionScaler::invert(const Eigen::VectorXd& scaled) const {
  Eigen::VectorXd out(scaled.size());
  for (Eigen::Index n = 0; n < scaled.size(); ++n) {
    out[n] = degenerate(n) ? 0.5 * (low[n] + high[n])
                           : low[n] + 0.5 * (scaled[n] + 1.0) * (high[n] - low[n]);
  }
  return out;
}

ActionScaler fit_scaler(const std::vector<Episode>& demos) {
  Eigen::Index dims = -1;
  ActionScaler s;
  bool any = false;
  for (const auto& ep : demos) {
    for (const auto& tr : ep.transitions) {
      if (!any) {
        dims = tr.action.size();
        s.low = tr.action;
        s.high = tr.action;
        any = true;
      } else {
        if (tr.action.size() != dims) throw std::invalid_argument("fit_scaler: ragged actions");
        s.low = s.low.cwiseMin(tr.action);
        s.high = s.high.cwiseMax(tr.action);
      }
    }
  }
  if (!any) throw std::runtime_error("fit_scaler: empty demo set");
  return s;
}

Eigen::VectorXd stack_history(const std::vector<Eigen::VectorXd>& history, int depth) {
  if (depth < 1) throw std::invalid_argument("stack_history: depth must be >= 1");
  if (history.empty()) throw std::invalid_argument("stack_history: empty history");
  const Eigen::Index w = history.front().size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(depth) * w);
  const int len = static_cast<int>(history.size());
  for (int i = 0; i < depth; ++i) {
    // slot i holds the observation depth-1-i steps back, clamped to the start
    const int idx = std::max(0, len - depth + i);
    out.segment(static_cast<Eigen::Index>(i) * w, w) = history[idx];
  }
  return out;
}

Episode stack_episode(const Episode& raw, int depth) {
  Episode out;
  out.success = raw.success;
  out.transitions.reserve(raw.size());
  std::vector<Eigen::VectorXd> hist;
  for (std::size_t t = 0; t < raw.size(); ++t) {
    const Transition& tr = raw.transitions[t];
    hist.push_back(tr.obs);
    Transition s = tr;
    s.obs = stack_history(hist, depth);
    std::vector<Eigen::VectorXd> next_hist = hist;
    next_hist.push_back(tr.next_obs);
    s.next_obs = stack_history(next_hist, depth);
    out.transitions.push_back(std::move(s));
  }
  return out;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_to_vec(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

constexpr const char* kDemoHeader = "c2fq-demos v1";

}  // namespace

void save_demos(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_demos: cannot open " + path);
  out << kDemoHeader << "\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    if (e > 0) out << "\n";
    for (const auto& tr : episodes[e].transitions) {
      json rec;
      rec["obs"] = vec_to_json(tr.obs);
      rec["action"] = vec_to_json(tr.action);
      rec["reward"] = tr.reward;
      rec["done"] = tr.done;
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw std::runtime_error("save_demos: write failed for " + path);
}

std::vector<Episode> load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_demos: cannot open " + path);
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != kDemoHeader)
    throw std::runtime_error("load_demos: bad header at line 1 in " + path);

  std::vector<Episode> episodes;
  Episode current;
  auto flush = [&]() {
    if (current.transitions.empty()) return;
    // Wire next_obs from the following record; the terminal next_obs is not
    // stored in the file and is backfilled with the terminal obs.
    for (std::size_t t = 0; t + 1 < current.transitions.size(); ++t)
      current.transitions[t].next_obs = current.transitions[t + 1].obs;
    current.transitions.back().next_obs = current.transitions.back().obs;
    current.success = current.transitions.back().reward == 1.0;
    episodes.push_back(std::move(current));
    current = Episode{};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      flush();
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
      Transition tr;
      tr.obs = json_to_vec(rec.at("obs"));
      tr.action = json_to_vec(rec.at("action"));
      tr.reward = rec.at("reward").get<double>();
      tr.done = rec.at("done").get<bool>();
      tr.is_demo = true;
      current.transitions.push_back(std::move(tr));
    } catch (const json::exception& e) {
      throw std::runtime_error("load_demos: malformed record at line " +
                               std::to_string(line_no) + " in " + path + ": " + e.what());
    }
  }
  flush();
  return episodes;
}

}  // namespace c2fq

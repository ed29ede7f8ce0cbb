#pragma once

#include "c2fq/agent.hpp"
#include "c2fq/metrics.hpp"

#include <json.hpp>

#include <string>

namespace c2fq {

std::string bc_variant_name(BcVariant v);
BcVariant bc_variant_from_name(const std::string& name);
std::string select_net_name(SelectNet s);
SelectNet select_net_from_name(const std::string& name);

nlohmann::json eigen_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd eigen_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const AgentConfig& c);
void from_json(const nlohmann::json& j, AgentConfig& c);
void to_json(nlohmann::json& j, const MetricsRecord& r);
void from_json(const nlohmann::json& j, MetricsRecord& r);

}  // namespace c2fq

#pragma once

// JSON forms of the domain types shared by the agent message schema, the
// service store and the HTTP API.

#include <json.hpp>

#include "aml/ruleengine.hpp"

namespace aml {

void to_json(nlohmann::json& j, const AccountKey& k);
void from_json(const nlohmann::json& j, AccountKey& k);
void to_json(nlohmann::json& j, const Version& v);
void from_json(const nlohmann::json& j, Version& v);

/// Throws ValidationError.
Date date_from_json(const nlohmann::json& j);
ProfileClass class_from_json(const nlohmann::json& j);
ClientKind kind_from_json(const nlohmann::json& j);

}  // namespace aml

namespace aml::profiler {
void to_json(nlohmann::json& j, const ClientProfile& p);
void from_json(const nlohmann::json& j, ClientProfile& p);
}  // namespace aml::profiler

namespace aml::rules {
void to_json(nlohmann::json& j, const RuleMatch& m);
void from_json(const nlohmann::json& j, RuleMatch& m);
void to_json(nlohmann::json& j, const Suspicion& s);
void from_json(const nlohmann::json& j, Suspicion& s);
void to_json(nlohmann::json& j, const ClassCounts& c);
void from_json(const nlohmann::json& j, ClassCounts& c);
}  // namespace aml::rules

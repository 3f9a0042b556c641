#include "aml/serialize.hpp"

namespace aml {

using nlohmann::json;

void to_json(json& j, const AccountKey& k) {
  j = json{{"client_id", k.client_id}, {"agency", k.agency}, {"account", k.account}};
}

void from_json(const json& j, AccountKey& k) {
  k.client_id = j.at("client_id").get<std::string>();
  k.agency = j.at("agency").get<std::string>();
  k.account = j.at("account").get<std::string>();
}

void to_json(json& j, const Version& v) { j = v.to_string(); }

void from_json(const json& j, Version& v) {
  auto p = Version::parse(j.get<std::string>());
  if (!p) throw ValidationError("bad version " + j.dump());
  v = *p;
}

Date date_from_json(const json& j) {
  auto d = parse_date(j.get<std::string>());
  if (!d) throw ValidationError("bad date " + j.dump());
  return *d;
}

ProfileClass class_from_json(const json& j) {
  auto c = parse_profile_class(j.get<std::string>());
  if (!c) throw ValidationError("bad profile class " + j.dump());
  return *c;
}

ClientKind kind_from_json(const json& j) {
  auto c = parse_client_kind(j.get<std::string>());
  if (!c) throw ValidationError("bad client kind " + j.dump());
  return *c;
}

}  // namespace aml

namespace aml::profiler {

void to_json(nlohmann::json& j, const ClientProfile& p) {
  nlohmann::json attrs = nlohmann::json::object();
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    const auto& t = p.attrs[a];
    attrs[std::string(rule_name(static_cast<Attribute>(a)))] = {t.annual_total, t.monthly_max,
                                                                 t.window_value};
  }
  j = nlohmann::json{{"key", p.key},
                     {"client_kind", to_string(p.client_kind)},
                     {"account_age_years", p.account_age_years},
                     {"attributes", std::move(attrs)}};
}

void from_json(const nlohmann::json& j, ClientProfile& p) {
  p.key = j.at("key").get<AccountKey>();
  p.client_kind = kind_from_json(j.at("client_kind"));
  p.account_age_years = j.at("account_age_years").get<int>();
  const auto& attrs = j.at("attributes");
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    const auto& t = attrs.at(std::string(rule_name(static_cast<Attribute>(a))));
    if (!t.is_array() || t.size() != 3) throw ValidationError("attribute triple expected");
    p.attrs[a] = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
  }
}

}  // namespace aml::profiler

namespace aml::rules {

void to_json(nlohmann::json& j, const RuleMatch& m) {
  j = nlohmann::json{{"rule_id", m.rule_id}, {"detail", m.detail}};
}

void from_json(const nlohmann::json& j, RuleMatch& m) {
  m.rule_id = j.at("rule_id").get<std::string>();
  m.detail = j.at("detail").get<std::string>();
}

void to_json(nlohmann::json& j, const Suspicion& s) {
  j = nlohmann::json{{"id", s.id()},
                     {"key", s.key},
                     {"client_kind", to_string(s.client_kind)},
                     {"analysis_class", to_string(s.analysis_class)},
                     {"original_class", to_string(s.original_class)},
                     {"triggered", s.triggered},
                     {"profile", s.profile},
                     {"analysis_date", format_date(s.analysis_date)},
                     {"mar", s.mar ? nlohmann::json(*s.mar) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, Suspicion& s) {
  s.key = j.at("key").get<AccountKey>();
  s.client_kind = kind_from_json(j.at("client_kind"));
  s.analysis_class = class_from_json(j.at("analysis_class"));
  s.original_class = class_from_json(j.at("original_class"));
  s.triggered = j.at("triggered").get<std::vector<RuleMatch>>();
  s.profile = j.at("profile").get<ClientProfile>();
  s.analysis_date = date_from_json(j.at("analysis_date"));
  const auto& mar = j.at("mar");
  s.mar = mar.is_null() ? std::nullopt : std::optional<double>(mar.get<double>());
}

void to_json(nlohmann::json& j, const ClassCounts& c) {
  j = nlohmann::json::object();
  for (ProfileClass cl : kAllClasses) {
    const auto i = static_cast<std::size_t>(cl);
    j[std::string(to_string(cl))] = {{"original", c.original[i]}, {"adjusted", c.adjusted[i]}};
  }
}

void from_json(const nlohmann::json& j, ClassCounts& c) {
  for (ProfileClass cl : kAllClasses) {
    const auto i = static_cast<std::size_t>(cl);
    const auto& e = j.at(std::string(to_string(cl)));
    c.original[i] = e.at("original").get<std::size_t>();
    c.adjusted[i] = e.at("adjusted").get<std::size_t>();
  }
}

}  // namespace aml::rules

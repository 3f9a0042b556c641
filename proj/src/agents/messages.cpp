#include "aml/agents/messages.hpp"

#include "aml/serialize.hpp"

namespace aml::agents {

using nlohmann::json;

std::string AgentId::to_string() const {
  switch (role) {
    case Role::CTS: return "CTS:" + product;
    case Role::GCT: return "GCT";
    case Role::APD: return "APD";
    case Role::EBP: return "EBP";
    case Role::External: return "EXTERNAL";
  }
  return "?";
}

std::optional<AgentId> AgentId::parse(std::string_view s) {
  if (s.starts_with("CTS:") && s.size() > 4) return cts_id(std::string(s.substr(4)));
  if (s == "GCT") return gct_id();
  if (s == "APD") return apd_id();
  if (s == "EBP") return ebp_id();
  if (s == "EXTERNAL") return external_id();
  return std::nullopt;
}

std::string_view to_string(ScanMode m) {
  return m == ScanMode::ByTransaction ? "ByTransaction" : "ByClient";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Confirmed: return "Confirmed";
    case Verdict::Rejected: return "Rejected";
    case Verdict::Escalated: return "Escalated";
  }
  return "?";
}

std::string_view to_string(Source s) { return s == Source::Agent ? "Agent" : "Analyst"; }

std::optional<Verdict> parse_verdict(std::string_view s) {
  for (Verdict v : {Verdict::Confirmed, Verdict::Rejected, Verdict::Escalated})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::optional<Source> parse_source(std::string_view s) {
  if (s == "Agent") return Source::Agent;
  if (s == "Analyst") return Source::Analyst;
  return std::nullopt;
}

namespace {

json opt_mar(const std::optional<double>& m) { return m ? json(*m) : json(nullptr); }
std::optional<double> mar_of(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}
json opt_str(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
std::optional<std::string> str_of(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<std::string>(j.get<std::string>());
}
json opt_version(const std::optional<Version>& v) { return v ? json(v->to_string()) : json(nullptr); }
std::optional<Version> version_of(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<Version>(j.get<Version>());
}

json phase1_json(const std::map<ClientKind, rules::ClassCounts>& p) {
  json j = json::object();
  for (const auto& [k, c] : p) j[std::string(to_string(k))] = c;
  return j;
}

std::map<ClientKind, rules::ClassCounts> phase1_of(const json& j) {
  std::map<ClientKind, rules::ClassCounts> out;
  for (const auto& [k, v] : j.items()) {
    auto kind = parse_client_kind(k);
    if (!kind) throw ValidationError("bad segment " + k);
    out[*kind] = v.get<rules::ClassCounts>();
  }
  return out;
}

std::string_view candidate_kind(ProfileCandidate::Kind k) {
  return k == ProfileCandidate::Kind::NewProfile ? "NewProfile" : "Shifted";
}

json candidate_json(const ProfileCandidate& c) {
  return json{{"id", c.id},
              {"kind", candidate_kind(c.kind)},
              {"segment", to_string(c.segment)},
              {"cluster", c.cluster},
              {"centroid", c.centroid},
              {"raw_centroid", c.raw_centroid},
              {"support", c.support},
              {"distance", c.distance},
              {"proposed_class", to_string(c.proposed_class)}};
}

ProfileCandidate candidate_of(const json& j) {
  ProfileCandidate c;
  c.id = j.at("id").get<std::string>();
  c.kind = j.at("kind").get<std::string>() == "Shifted" ? ProfileCandidate::Kind::Shifted
                                                       : ProfileCandidate::Kind::NewProfile;
  c.segment = kind_from_json(j.at("segment"));
  c.cluster = j.at("cluster").get<int>();
  c.centroid = j.at("centroid").get<std::vector<double>>();
  c.raw_centroid = j.at("raw_centroid").get<std::vector<double>>();
  c.support = j.at("support").get<std::size_t>();
  c.distance = j.at("distance").get<double>();
  c.proposed_class = class_from_json(j.at("proposed_class"));
  return c;
}

struct ToJson {
  json operator()(const AnalyzeRequest& m) const {
    return {{"request_id", m.request_id},
            {"mode", to_string(m.mode)},
            {"analysis_date", format_date(m.analysis_date)},
            {"mar", opt_mar(m.mar)},
            {"product", m.product},
            {"client_id", opt_str(m.client_id)},
            {"bank_version", opt_version(m.bank_version)}};
  }
  json operator()(const ScanResult& m) const {
    return {{"request_id", m.request_id}, {"product", m.product},
            {"client_id", opt_str(m.client_id)}, {"suspicions", m.suspicions},
            {"scanned", m.scanned}, {"phase1", phase1_json(m.phase1)},
            {"error", opt_str(m.error)}};
  }
  json operator()(const SuspicionFound& m) const {
    return {{"request_id", m.request_id}, {"product", m.product}, {"suspicion", m.suspicion}};
  }
  json operator()(const ClientScanRequest& m) const {
    return {{"request_id", m.request_id},
            {"client_id", m.client_id},
            {"product", m.product},
            {"origin_product", m.origin_product},
            {"analysis_date", format_date(m.analysis_date)},
            {"mar", opt_mar(m.mar)},
            {"bank_version", opt_version(m.bank_version)}};
  }
  json operator()(const AllScansComplete& m) const {
    return {{"request_id", m.request_id}, {"suspicions", m.suspicions},
            {"scanned", m.scanned},       {"phase1", phase1_json(m.phase1)},
            {"products", m.products},     {"errors", m.errors}};
  }
  json operator()(const RequestRejected& m) const {
    return {{"request_id", m.request_id}, {"reason", m.reason}};
  }
  json operator()(const DecisionOutcome& m) const {
    return {{"suspicion_id", m.suspicion_id},
            {"verdict", to_string(m.verdict)},
            {"source", to_string(m.source)},
            {"matrix_key", m.matrix_key},
            {"request_id", m.request_id}};
  }
  json operator()(const ProfileSuggestion& m) const {
    json c = json::array();
    for (const auto& x : m.candidates) c.push_back(candidate_json(x));
    return {{"suggestion_id", m.suggestion_id}, {"candidates", std::move(c)}, {"note", m.note}};
  }
  json operator()(const ProfileValidation& m) const {
    return {{"suggestion_id", m.suggestion_id}, {"accepted", m.accepted}, {"rejected", m.rejected}};
  }
};

}  // namespace

std::string_view message_type(const Message& m) {
  constexpr std::string_view names[] = {"AnalyzeRequest",    "ScanResult",       "SuspicionFound",
                                        "ClientScanRequest", "AllScansComplete", "RequestRejected",
                                        "DecisionOutcome",   "ProfileSuggestion", "ProfileValidation"};
  return names[m.index()];
}

json message_to_json(const Message& m) {
  json body = std::visit(ToJson{}, m);
  return json{{"type", message_type(m)}, {"body", std::move(body)}};
}

Message message_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  const json& b = j.at("body");
  if (type == "AnalyzeRequest") {
    AnalyzeRequest m;
    m.request_id = b.at("request_id").get<std::string>();
    m.mode = b.at("mode").get<std::string>() == "ByClient" ? ScanMode::ByClient : ScanMode::ByTransaction;
    m.analysis_date = date_from_json(b.at("analysis_date"));
    m.mar = mar_of(b.at("mar"));
    m.product = b.at("product").get<std::string>();
    m.client_id = str_of(b.at("client_id"));
    m.bank_version = version_of(b.at("bank_version"));
    return m;
  }
  if (type == "ScanResult") {
    ScanResult m;
    m.request_id = b.at("request_id").get<std::string>();
    m.product = b.at("product").get<std::string>();
    m.client_id = str_of(b.at("client_id"));
    m.suspicions = b.at("suspicions").get<std::vector<rules::Suspicion>>();
    m.scanned = b.at("scanned").get<std::size_t>();
    m.phase1 = phase1_of(b.at("phase1"));
    m.error = str_of(b.at("error"));
    return m;
  }
  if (type == "SuspicionFound") {
    return SuspicionFound{b.at("request_id").get<std::string>(), b.at("product").get<std::string>(),
                          b.at("suspicion").get<rules::Suspicion>()};
  }
  if (type == "ClientScanRequest") {
    ClientScanRequest m;
    m.request_id = b.at("request_id").get<std::string>();
    m.client_id = b.at("client_id").get<std::string>();
    m.product = b.at("product").get<std::string>();
    m.origin_product = b.at("origin_product").get<std::string>();
    m.analysis_date = date_from_json(b.at("analysis_date"));
    m.mar = mar_of(b.at("mar"));
    m.bank_version = version_of(b.at("bank_version"));
    return m;
  }
  if (type == "AllScansComplete") {
    AllScansComplete m;
    m.request_id = b.at("request_id").get<std::string>();
    m.suspicions = b.at("suspicions").get<std::vector<rules::Suspicion>>();
    m.scanned = b.at("scanned").get<std::size_t>();
    m.phase1 = phase1_of(b.at("phase1"));
    m.products = b.at("products").get<std::vector<std::string>>();
    m.errors = b.at("errors").get<std::vector<std::string>>();
    return m;
  }
  if (type == "RequestRejected") {
    return RequestRejected{b.at("request_id").get<std::string>(), b.at("reason").get<std::string>()};
  }
  if (type == "DecisionOutcome") {
    DecisionOutcome m;
    m.suspicion_id = b.at("suspicion_id").get<std::string>();
    auto v = parse_verdict(b.at("verdict").get<std::string>());
    auto s = parse_source(b.at("source").get<std::string>());
    if (!v || !s) throw ValidationError("bad decision outcome");
    m.verdict = *v;
    m.source = *s;
    m.matrix_key = b.at("matrix_key").get<std::string>();
    m.request_id = b.at("request_id").get<std::string>();
    return m;
  }
  if (type == "ProfileSuggestion") {
    ProfileSuggestion m;
    m.suggestion_id = b.at("suggestion_id").get<std::string>();
    for (const auto& c : b.at("candidates")) m.candidates.push_back(candidate_of(c));
    m.note = b.at("note").get<std::string>();
    return m;
  }
  if (type == "ProfileValidation") {
    return ProfileValidation{b.at("suggestion_id").get<std::string>(),
                             b.at("accepted").get<std::vector<std::string>>(),
                             b.at("rejected").get<std::vector<std::string>>()};
  }
  throw ValidationError("unknown message type " + type);
}

json to_json(const Envelope& e) {
  return json{{"seq", e.sequence},
              {"from", e.from.to_string()},
              {"to", e.to.to_string()},
              {"message", message_to_json(e.message)}};
}

Envelope envelope_from_json(const json& j) {
  Envelope e;
  e.sequence = j.at("seq").get<std::uint64_t>();
  auto from = AgentId::parse(j.at("from").get<std::string>());
  auto to = AgentId::parse(j.at("to").get<std::string>());
  if (!from || !to) throw ValidationError("bad agent id in envelope");
  e.from = *from;
  e.to = *to;
  e.message = message_from_json(j.at("message"));
  return e;
}

}  // namespace aml::agents

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aml/learner/classification.hpp"
#include "aml/learner/features.hpp"
#include "aml/learner/pipeline.hpp"

namespace aml::learner {

using profiler::Attribute;
using profiler::ClientProfile;

// ---------------------------------------------------------------------------
// features

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"age"};
    for (std::size_t a = 0; a < profiler::kAttributeCount; ++a)
      n.emplace_back(profiler::rule_name(static_cast<Attribute>(a)));
    return n;
  }();
  return names;
}

Eigen::Matrix<double, 1, Eigen::Dynamic> feature_row(const ClientProfile& p) {
  Eigen::Matrix<double, 1, Eigen::Dynamic> r(kFeatureCount);
  r(0) = p.account_age_years;
  for (std::size_t a = 0; a < profiler::kAttributeCount; ++a)
    r(static_cast<Eigen::Index>(a + 1)) = p.attrs[a].annual_total;
  return r;
}

FeatureMatrix feature_matrix(std::span<const ClientProfile> profiles) {
  FeatureMatrix x(static_cast<Eigen::Index>(profiles.size()), kFeatureCount);
  for (std::size_t i = 0; i < profiles.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = feature_row(profiles[i]);
  return x;
}

Standardizer Standardizer::fit(const FeatureMatrix& x) {
  Standardizer s;
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  s.mean = x.colwise().sum() / n;
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().sum() / n).sqrt().matrix();
  for (Eigen::Index c = 0; c < s.scale.cols(); ++c)
    if (!(s.scale(c) > 1e-12)) s.scale(c) = 1.0;
  return s;
}

int Clustering::nearest(const Eigen::Matrix<double, 1, Eigen::Dynamic>& raw) const {
  Eigen::Matrix<double, 1, Eigen::Dynamic> z =
      (raw - standardizer.mean).array() / standardizer.scale.array();
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    double d = (z - centroids.row(j)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

std::vector<int> Clustering::labels_for(std::span<const ClientProfile> profiles) const {
  std::vector<int> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    auto it = assignment.find(p.key);
    if (it == assignment.end())
      throw NotFoundError("clustering has no assignment for " + p.key.to_string());
    out.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// classification

ProfileClass ProfileClassification::class_of(int cluster) const {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= mapping.size())
    throw NotFoundError("no class for cluster " + std::to_string(cluster));
  return mapping[static_cast<std::size_t>(cluster)];
}

bool ProfileClassification::has_class(ProfileClass c) const {
  return std::find(mapping.begin(), mapping.end(), c) != mapping.end();
}

std::vector<ClusterStats> cluster_stats(const Clustering& clustering,
                                        std::span<const ClientProfile> profiles,
                                        const RiskScoring& scoring) {
  std::vector<ClusterStats> stats(static_cast<std::size_t>(clustering.k));
  std::vector<double> near(stats.size(), 0);
  for (const auto& p : profiles) {
    auto it = clustering.assignment.find(p.key);
    if (it == clustering.assignment.end()) continue;
    auto& s = stats[static_cast<std::size_t>(it->second)];
    ++s.population;
    s.mean_movements += p[Attribute::Movl].annual_total;
    s.mean_high_band += p[Attribute::Band4].annual_total + p[Attribute::Band5].annual_total +
                        p[Attribute::Band6].annual_total;
    s.mean_pct_ted += p[Attribute::PctTed].annual_total;
    near[static_cast<std::size_t>(it->second)] +=
        p[profiler::band_attribute(scoring.near_limit_band)].annual_total;
  }
  for (std::size_t c = 0; c < stats.size(); ++c) {
    auto& s = stats[c];
    if (s.population == 0) continue;
    const double n = static_cast<double>(s.population);
    s.near_limit_share = s.mean_movements > 0 ? near[c] / s.mean_movements : 0;
    s.mean_movements /= n;
    s.mean_high_band /= n;
    s.mean_pct_ted /= n;
  }
  return stats;
}

ProfileClassification map_risk(const Clustering& clustering,
                               std::span<const ClientProfile> profiles, ClientKind segment,
                               const RiskScoring& scoring) {
  const auto stats = cluster_stats(clustering, profiles, scoring);
  const std::size_t k = stats.size();
  ProfileClassification out;
  out.segment = segment;
  out.mapping.assign(k, ProfileClass::Risk1);
  std::vector<bool> taken(k, false);

  // classes in the order they are given up when clusters are scarce
  constexpr ProfileClass kPriority[] = {ProfileClass::Standard, ProfileClass::Risk3,
                                        ProfileClass::Risk2, ProfileClass::LowUsage};
  auto active = [&](ProfileClass c) {
    for (std::size_t i = 0; i < std::size(kPriority); ++i)
      if (kPriority[i] == c) return i < k;
    return false;
  };

  auto pick = [&](ProfileClass c, auto score) {
    if (!active(c)) return;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < k; ++i) {
      if (taken[i]) continue;
      if (!best || score(stats[i]) > score(stats[*best])) best = i;
    }
    if (!best) return;
    taken[*best] = true;
    out.mapping[*best] = c;
  };

  pick(ProfileClass::Risk3, [](const ClusterStats& s) { return s.mean_high_band * s.mean_pct_ted; });
  pick(ProfileClass::Risk2, [](const ClusterStats& s) { return s.near_limit_share; });
  pick(ProfileClass::LowUsage, [](const ClusterStats& s) { return -s.mean_movements; });
  pick(ProfileClass::Standard, [](const ClusterStats& s) { return static_cast<double>(s.population); });
  return out;
}

ReclassTable build_reclass_table(const InducedRuleSet& rules, const FeatureMatrix& features,
                                 std::span<const int> cluster_labels,
                                 const ProfileClassification& classification) {
  std::map<std::pair<std::size_t, ProfileClass>, ReclassEntry> found;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    auto fired = rules.fire(features.row(i));
    if (!fired) continue;
    const ProfileClass predicted = classification.class_of(rules.rules[*fired].label);
    const ProfileClass actual = classification.class_of(cluster_labels[static_cast<std::size_t>(i)]);
    if (predicted != ProfileClass::Risk2 && predicted != ProfileClass::Risk3) continue;
    if (!is_reclassifiable(actual)) continue;
    auto& e = found[{*fired, actual}];
    e.rule_index = *fired;
    e.from = actual;
    e.to = predicted;
    ++e.overlap;
  }
  ReclassTable table;
  for (auto& [_, e] : found) table.entries.push_back(e);
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const ReclassEntry& a, const ReclassEntry& b) {
                     if (a.to != b.to) return severity(a.to) > severity(b.to);
                     if (a.rule_index != b.rule_index) return a.rule_index < b.rule_index;
                     return a.from < b.from;
                   });
  return table;
}

// ---------------------------------------------------------------------------
// pipeline

Clustering cluster_profiles(std::span<const ClientProfile> profiles, int k,
                            const KMeansOptions& options) {
  const FeatureMatrix raw = feature_matrix(profiles);
  Clustering c;
  c.k = k;
  c.standardizer = Standardizer::fit(raw);
  const FeatureMatrix z = c.standardizer.apply(raw);
  KMeansOptions opt = options;
  opt.k = k;
  auto result = kmeans(z, opt);
  c.centroids = std::move(result.centroids);
  c.inertia = result.inertia;
  for (std::size_t i = 0; i < profiles.size(); ++i)
    c.assignment.emplace(profiles[i].key, result.assignment[i]);
  return c;
}

namespace {

SweepEntry run_once(std::span<const ClientProfile> profiles, const FeatureMatrix& raw, int k,
                    const LearnOptions& options, std::uint64_t seed) {
  SweepEntry e;
  KMeansOptions km = options.kmeans;
  km.seed = seed;
  e.clustering = cluster_profiles(profiles, k, km);
  const auto labels = e.clustering.labels_for(profiles);
  e.candidates.push_back(induce_decision_list(raw, labels, options.induction));
  e.candidates.push_back(induce_decision_tree(raw, labels, options.induction));
  e.best = select_best(e.candidates);
  return e;
}

double accuracy(const SweepEntry& e, std::size_t n) {
  return n == 0 ? 1.0 : 1.0 - static_cast<double>(e.best.misclassified) / static_cast<double>(n);
}

}  // namespace

std::vector<SweepEntry> sweep_k(std::span<const ClientProfile> profiles,
                                std::span<const int> k_range, const LearnOptions& options) {
  const FeatureMatrix raw = feature_matrix(profiles);
  std::vector<SweepEntry> out;
  for (int k : k_range) out.push_back(run_once(profiles, raw, k, options, options.kmeans.seed));
  return out;
}

SegmentModel learn_segment(std::span<const ClientProfile> profiles, ClientKind segment,
                           const LearnOptions& options, const Version& version) {
  const FeatureMatrix raw = feature_matrix(profiles);
  const std::size_t n = profiles.size();
  SweepEntry chosen;
  std::string rationale;

  if (options.mode == RunMode::Restarts) {
    if (!options.k) throw ConfigError("restart mode needs a fixed k");
    std::optional<SweepEntry> best;
    for (int r = 0; r < options.runs; ++r) {
      auto e = run_once(profiles, raw, *options.k, options,
                        options.kmeans.seed + static_cast<std::uint64_t>(r) * 7919);
      if (!best || e.best.misclassified < best->best.misclassified ||
          (e.best.misclassified == best->best.misclassified &&
           e.clustering.inertia < best->clustering.inertia))
        best = std::move(e);
    }
    chosen = std::move(*best);
    rationale = "fixed k=" + std::to_string(*options.k) + ", best of " +
                std::to_string(options.runs) + " seedings by misclassified then inertia";
  } else if (options.k) {
    chosen = run_once(profiles, raw, *options.k, options, options.kmeans.seed);
    rationale = "fixed k=" + std::to_string(*options.k) + " from configuration";
  } else {
    auto entries = sweep_k(profiles, options.k_range, options);
    if (entries.empty()) throw ConfigError("empty k range");
    std::size_t pick = 0;
    bool any = false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (accuracy(entries[i], n) >= options.min_rule_accuracy &&
          (!any || entries[i].clustering.k > entries[pick].clustering.k)) {
        pick = i;
        any = true;
      }
    }
    if (!any) {
      for (std::size_t i = 1; i < entries.size(); ++i)
        if (accuracy(entries[i], n) > accuracy(entries[pick], n)) pick = i;
    }
    std::ostringstream os;
    os << "sweep over k=" << entries.front().clustering.k << ".." << entries.back().clustering.k
       << "; k=" << entries[pick].clustering.k
       << (any ? " is the largest k with rule accuracy >= " : " has the best rule accuracy, none reached ")
       << options.min_rule_accuracy;
    rationale = os.str();
    chosen = std::move(entries[pick]);
  }

  SegmentModel m;
  m.segment = segment;
  m.clustering = std::move(chosen.clustering);
  m.rules = std::move(chosen.best);
  m.rules.version = version.to_string();
  m.training_accuracy = accuracy(SweepEntry{{}, m.rules, {}}, n);
  m.rationale = std::move(rationale);
  m.classification = map_risk(m.clustering, profiles, segment, options.scoring);
  m.reclass = build_reclass_table(m.rules, raw, m.clustering.labels_for(profiles), m.classification);
  return m;
}

// ---------------------------------------------------------------------------
// persistence

const SegmentModel& ModelBundle::segment(ClientKind k) const {
  auto it = segments.find(k);
  if (it == segments.end())
    throw NotFoundError("model bundle has no " + std::string(to_string(k)) + " segment");
  return it->second;
}

Version next_version(Date date, std::span<const Version> existing) {
  int seq = 0;
  for (const auto& v : existing)
    if (v.date == date) seq = std::max(seq, v.sequence);
  return Version{date, seq + 1};
}

namespace {

std::string prefix(ClientKind k) { return k == ClientKind::SingularPerson ? "singular_" : "entity_"; }

std::string join_row(const Eigen::Matrix<double, 1, Eigen::Dynamic>& r) {
  std::string s;
  for (Eigen::Index i = 0; i < r.cols(); ++i) {
    if (i) s += ' ';
    s += format_double(r(i));
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  if (!out) throw IoError("write failed: " + p.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

/// Splits "key rest-of-line".
std::pair<std::string_view, std::string_view> head(std::string_view line) {
  auto sp = line.find(' ');
  if (sp == std::string_view::npos) return {line, {}};
  return {line.substr(0, sp), line.substr(sp + 1)};
}

Eigen::Matrix<double, 1, Eigen::Dynamic> parse_row(std::string_view text, const std::string& file) {
  auto parts = split(trim(text), ' ');
  Eigen::Matrix<double, 1, Eigen::Dynamic> r(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto v = parse_double(parts[i]);
    if (!v) throw ValidationError(file + ": bad number '" + std::string(parts[i]) + "'");
    r(static_cast<Eigen::Index>(i)) = *v;
  }
  return r;
}

std::string rule_line(const ClassificationRule& r) {
  return describe(r, feature_names());
}

ClassificationRule parse_rule(std::string_view text, const std::string& file) {
  auto arrow = text.rfind(" -> ");
  if (arrow == std::string_view::npos) throw ValidationError(file + ": rule without label");
  ClassificationRule r;
  auto label = parse_int(text.substr(arrow + 4));
  if (!label) throw ValidationError(file + ": bad rule label");
  r.label = static_cast<int>(*label);
  auto body = trim(text.substr(0, arrow));
  if (body == "TRUE") return r;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto next = body.find(" AND ", pos);
    auto term = body.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    auto parts = split(trim(term), ' ');
    if (parts.size() != 3) throw ValidationError(file + ": bad condition '" + std::string(term) + "'");
    const auto& names = feature_names();
    auto f = std::find(names.begin(), names.end(), parts[0]);
    auto thr = parse_double(parts[2]);
    if (f == names.end() || !thr || (parts[1] != "<=" && parts[1] != ">"))
      throw ValidationError(file + ": bad condition '" + std::string(term) + "'");
    r.conditions.push_back({static_cast<int>(f - names.begin()),
                            parts[1] == "<=" ? Condition::Op::LessEq : Condition::Op::Greater, *thr});
    if (next == std::string_view::npos) break;
    pos = next + 5;
  }
  return r;
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string ver = "version " + bundle.version.to_string() + "\n";
  for (const auto& [kind, m] : bundle.segments) {
    const std::string seg = "segment " + std::string(to_string(kind)) + "\n";
    {
      std::ostringstream os;
      os << ver << seg << "k " << m.clustering.k << "\ninertia " << format_double(m.clustering.inertia)
         << "\nfeatures";
      for (const auto& n : feature_names()) os << ' ' << n;
      os << "\nmean " << join_row(m.clustering.standardizer.mean) << "\nscale "
         << join_row(m.clustering.standardizer.scale) << '\n';
      for (Eigen::Index j = 0; j < m.clustering.centroids.rows(); ++j)
        os << "centroid " << join_row(m.clustering.centroids.row(j)) << '\n';
      for (const auto& [key, c] : m.clustering.assignment)
        os << "assign " << key.client_id << ';' << key.agency << ';' << key.account << ' ' << c << '\n';
      write_file(dir / (prefix(kind) + "clustering.txt"), os.str());
    }
    {
      std::ostringstream os;
      os << ver << seg << "algorithm " << to_string(m.rules.algorithm) << "\nmisclassified "
         << m.rules.misclassified << "\naccuracy " << format_double(m.training_accuracy)
         << "\nrationale " << m.rationale << '\n';
      for (const auto& r : m.rules.rules) os << "rule " << rule_line(r) << '\n';
      write_file(dir / (prefix(kind) + "rules.txt"), os.str());
    }
    {
      std::ostringstream os;
      os << ver << seg << "confirmed " << (m.classification.confirmed ? "yes" : "no") << '\n';
      for (std::size_t c = 0; c < m.classification.mapping.size(); ++c)
        os << "cluster " << c << ' ' << to_string(m.classification.mapping[c]) << '\n';
      write_file(dir / (prefix(kind) + "classification.txt"), os.str());
    }
    {
      std::ostringstream os;
      os << ver << seg;
      for (const auto& e : m.reclass.entries)
        os << "entry " << e.rule_index << ' ' << to_string(e.from) << ' ' << to_string(e.to) << ' '
           << e.overlap << '\n';
      write_file(dir / (prefix(kind) + "reclass.txt"), os.str());
    }
  }
}

ModelBundle read_bundle(const std::filesystem::path& dir) {
  ModelBundle bundle;
  bool have_version = false;
  for (ClientKind kind : {ClientKind::SingularPerson, ClientKind::LegalEntity}) {
    const auto clustering_path = dir / (prefix(kind) + "clustering.txt");
    if (!std::filesystem::exists(clustering_path)) continue;
    SegmentModel m;
    m.segment = kind;

    auto check_header = [&](const std::vector<std::string>& lines, const std::string& file) {
      if (lines.size() < 2) throw ValidationError(file + ": truncated");
      auto [k0, v0] = head(lines[0]);
      auto [k1, v1] = head(lines[1]);
      auto v = Version::parse(v0);
      if (k0 != "version" || !v) throw ValidationError(file + ": missing version");
      if (k1 != "segment" || v1 != to_string(kind)) throw ValidationError(file + ": wrong segment");
      if (!have_version) {
        bundle.version = *v;
        have_version = true;
      } else if (!(bundle.version == *v)) {
        throw ValidationError(file + ": version differs from the rest of the bundle");
      }
    };

    {
      const auto file = clustering_path.string();
      auto lines = read_lines(clustering_path);
      check_header(lines, file);
      std::vector<Eigen::Matrix<double, 1, Eigen::Dynamic>> cents;
      for (std::size_t i = 2; i < lines.size(); ++i) {
        auto [key, rest] = head(lines[i]);
        if (key == "k") m.clustering.k = static_cast<int>(parse_int(rest).value_or(0));
        else if (key == "inertia") m.clustering.inertia = parse_double(rest).value_or(0);
        else if (key == "mean") m.clustering.standardizer.mean = parse_row(rest, file);
        else if (key == "scale") m.clustering.standardizer.scale = parse_row(rest, file);
        else if (key == "centroid") cents.push_back(parse_row(rest, file));
        else if (key == "assign") {
          auto sp = rest.rfind(' ');
          auto ids = split(rest.substr(0, sp), ';');
          auto c = parse_int(rest.substr(sp + 1));
          if (ids.size() != 3 || !c) throw ValidationError(file + ": bad assignment");
          m.clustering.assignment.emplace(
              AccountKey{std::string(ids[0]), std::string(ids[1]), std::string(ids[2])},
              static_cast<int>(*c));
        } else if (key != "features") {
          throw ValidationError(file + ": unknown record '" + std::string(key) + "'");
        }
      }
      if (m.clustering.k <= 0 || cents.size() != static_cast<std::size_t>(m.clustering.k))
        throw ValidationError(file + ": centroid count does not match k");
      m.clustering.centroids.resize(m.clustering.k, static_cast<Eigen::Index>(kFeatureCount));
      for (std::size_t j = 0; j < cents.size(); ++j) {
        if (cents[j].cols() != static_cast<Eigen::Index>(kFeatureCount))
          throw ValidationError(file + ": centroid width");
        m.clustering.centroids.row(static_cast<Eigen::Index>(j)) = cents[j];
      }
    }
    {
      const auto path = dir / (prefix(kind) + "rules.txt");
      const auto file = path.string();
      auto lines = read_lines(path);
      check_header(lines, file);
      m.rules.version = bundle.version.to_string();
      for (std::size_t i = 2; i < lines.size(); ++i) {
        auto [key, rest] = head(lines[i]);
        if (key == "algorithm")
          m.rules.algorithm = rest == "DecisionTree" ? InductionAlgorithm::DecisionTree
                                                     : InductionAlgorithm::DecisionList;
        else if (key == "misclassified")
          m.rules.misclassified = static_cast<std::size_t>(parse_int(rest).value_or(0));
        else if (key == "accuracy") m.training_accuracy = parse_double(rest).value_or(0);
        else if (key == "rationale") m.rationale = std::string(rest);
        else if (key == "rule") m.rules.rules.push_back(parse_rule(rest, file));
        else throw ValidationError(file + ": unknown record '" + std::string(key) + "'");
      }
    }
    {
      const auto path = dir / (prefix(kind) + "classification.txt");
      const auto file = path.string();
      auto lines = read_lines(path);
      check_header(lines, file);
      m.classification.segment = kind;
      for (std::size_t i = 2; i < lines.size(); ++i) {
        auto [key, rest] = head(lines[i]);
        if (key == "confirmed") {
          m.classification.confirmed = rest == "yes";
        } else if (key == "cluster") {
          auto parts = split(rest, ' ');
          auto cls = parts.size() == 2 ? parse_profile_class(parts[1]) : std::nullopt;
          auto id = parts.size() == 2 ? parse_int(parts[0]) : std::nullopt;
          if (!cls || !id || *id != static_cast<long long>(m.classification.mapping.size()))
            throw ValidationError(file + ": bad cluster mapping");
          m.classification.mapping.push_back(*cls);
        } else {
          throw ValidationError(file + ": unknown record '" + std::string(key) + "'");
        }
      }
      if (m.classification.mapping.size() != static_cast<std::size_t>(m.clustering.k))
        throw ValidationError(file + ": mapping does not cover every cluster");
    }
    {
      const auto path = dir / (prefix(kind) + "reclass.txt");
      const auto file = path.string();
      auto lines = read_lines(path);
      check_header(lines, file);
      for (std::size_t i = 2; i < lines.size(); ++i) {
        auto [key, rest] = head(lines[i]);
        auto parts = split(rest, ' ');
        if (key != "entry" || parts.size() != 4) throw ValidationError(file + ": bad entry");
        auto idx = parse_int(parts[0]);
        auto from = parse_profile_class(parts[1]);
        auto to = parse_profile_class(parts[2]);
        auto ov = parse_int(parts[3]);
        if (!idx || !from || !to || !ov || *idx < 0 ||
            static_cast<std::size_t>(*idx) >= m.rules.rules.size())
          throw ValidationError(file + ": bad entry");
        if (!is_reclassifiable(*from))
          throw ValidationError(file + ": entry moves a non-reclassifiable class");
        m.reclass.entries.push_back(
            {static_cast<std::size_t>(*idx), *from, *to, static_cast<std::size_t>(*ov)});
      }
    }
    bundle.segments.emplace(kind, std::move(m));
  }
  if (bundle.segments.empty()) throw NotFoundError("no model bundle in " + dir.string());
  return bundle;
}

}  // namespace aml::learner

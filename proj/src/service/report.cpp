#include "aml/service/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace aml::service {

namespace {

constexpr std::string_view kMask = "██████";

std::string pad_right(std::string s, std::size_t width) {
  // widths count code points so accented labels line up
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  if (cps < width) s.append(width - cps, ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string signed_delta(long long d) {
  if (d == 0) return "0";
  return (d > 0 ? "+" : "-") + group_thousands(d > 0 ? d : -d);
}

std::string mar_text(const std::optional<double>& mar) {
  return mar ? short_decimal(*mar) + "%" : std::string("sem margem");
}

std::string value_text(double v, bool percent) {
  if (!percent) return std::to_string(std::llround(v));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string_view segment_label(ClientKind k) {
  return k == ClientKind::SingularPerson ? "Pessoa física" : "Pessoa jurídica";
}

std::string day_month_year(Date d) {
  return std::to_string(static_cast<unsigned>(d.day())) + "/" +
         std::to_string(static_cast<unsigned>(d.month())) + "/" + std::to_string(static_cast<int>(d.year()));
}

}  // namespace

std::string group_thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back('.');
    out.push_back(digits[i]);
  }
  return v < 0 ? "-" + out : out;
}

long long percent_half_up(std::size_t part, std::size_t whole) {
  if (whole == 0) return 0;
  return static_cast<long long>((200 * part + whole) / (2 * whole));
}

std::string percent_4dp(std::size_t part, std::size_t whole) {
  unsigned long long units = 0;  // ten-thousandths of a percent
  if (whole > 0) units = (2ULL * part * 1000000ULL + whole) / (2ULL * whole);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%llu.%04llu", units / 10000, units % 10000);
  return buf;
}

std::string_view class_label(ProfileClass c) {
  switch (c) {
    case ProfileClass::LowUsage: return "Baixa utilização";
    case ProfileClass::Standard: return "Padrão";
    case ProfileClass::Risk1: return "Risco 1";
    case ProfileClass::Risk2: return "Risco 2";
    case ProfileClass::Risk3: return "Risco 3";
  }
  return "?";
}

std::string render_capture_report(const AnalysisRun& run) {
  std::ostringstream os;
  os << "== Captura iniciada em " << run.started_at << "\n\n";
  os << group_thousands(static_cast<long long>(run.analyzed)) << " perfis selecionados      MAR: "
     << mar_text(run.mar) << "\n";
  if (run.product != agents::kAllProducts || run.client_id)
    os << "Escopo: produto " << run.product << (run.client_id ? ", cliente " + *run.client_id : "") << "\n";
  os << "\nFase 1 - Reclassificação pelas regras aprendidas\n";

  const ClientKind kinds[] = {ClientKind::SingularPerson, ClientKind::LegalEntity};
  int col = 0;
  for (ClientKind k : kinds) {
    ++col;
    auto it = run.segments.find(k);
    os << "(" << col << ") " << pad_right(std::string(segment_label(k)), 17);
    if (it == run.segments.end()) {
      os << "sem modelo\n";
      continue;
    }
    os << pad_left(std::to_string(it->second.learned_rules), 3) << " regras  versão "
       << it->second.model_version.to_string() << "\n";
  }
  os << pad_right("Perfil", 18) << pad_left("(1) Original", 13) << pad_left("Ajuste", 8)
     << pad_left("(2) Original", 14) << pad_left("Ajuste", 8) << "\n";
  std::array<std::size_t, 2> totals{};
  for (ProfileClass c : kAllClasses) {
    os << pad_right(std::string(class_label(c)), 18);
    std::size_t i = 0;
    for (ClientKind k : kinds) {
      auto it = run.phase1.find(k);
      const auto ci = static_cast<std::size_t>(c);
      std::string orig = "-", delta = "-";
      if (it != run.phase1.end()) {
        orig = group_thousands(static_cast<long long>(it->second.original[ci]));
        delta = signed_delta(it->second.delta(c));
        totals[i] += it->second.original[ci];
      }
      os << pad_left(orig, i == 0 ? 13 : 14) << pad_left(delta, 8);
      ++i;
    }
    os << "\n";
  }
  os << pad_right("Total", 18) << pad_left(group_thousands(static_cast<long long>(totals[0])), 13)
     << pad_left("", 8) << pad_left(group_thousands(static_cast<long long>(totals[1])), 14) << "\n";

  os << "\nFase 2 - Captura pelas regras operacionais\n";
  os << pad_left(std::to_string(run.normative_rules), 2) << " regras normativas   versão "
     << run.bank_version.to_string() << "\n";
  os << pad_left(std::to_string(run.profile_rules), 2) << " regras de perfil    versão "
     << run.bank_version.to_string() << "\n";
  std::size_t total = run.normative_rules + run.profile_rules;
  os << "Regras em uso: " << run.normative_rules << " + " << run.profile_rules;
  for (ClientKind k : kinds)
    if (auto it = run.segments.find(k); it != run.segments.end()) {
      os << " + " << it->second.learned_rules;
      total += it->second.learned_rules;
    }
  os << " = " << total << "\n\n";
  os << group_thousands(static_cast<long long>(run.suspicions.size())) << " perfis suspeitos\n";
  os << percent_4dp(run.suspicions.size(), run.analyzed) << "% dos perfis analisados\n";
  for (const auto& e : run.errors) os << "aviso: " << e << "\n";
  os << "\n== Captura concluída em " << run.captured_at << "\n";
  return os.str();
}

std::string render_analysis_report(const AnalysisRun& run, const ReportOptions& options) {
  std::ostringstream os;
  const std::size_t n = run.suspicions.size();
  os << "== Análise iniciada em " << run.analysis_started_at << "\n\n";
  os << "Fase 3 - Análise dos suspeitos\n";
  os << "Captura de " << day_month_year(run.analysis_date) << "  Perfis analisados: "
     << group_thousands(static_cast<long long>(run.analyzed)) << "  MAR: " << mar_text(run.mar) << "\n\n";

  os << "Suspeitos por classe:\n";
  std::array<std::size_t, 5> per_class{};
  for (const auto& s : run.suspicions) ++per_class[static_cast<std::size_t>(s.analysis_class)];
  for (ProfileClass c : kAllClasses) {
    auto k = per_class[static_cast<std::size_t>(c)];
    os << class_label(c) << " - " << group_thousands(static_cast<long long>(k)) << " "
       << percent_half_up(k, n) << "%\n";
  }
  os << "Total de suspeitos - " << group_thousands(static_cast<long long>(n)) << "\n\n";

  std::map<std::string, std::size_t> hist;
  std::size_t occurrences = 0;
  for (const auto& s : run.suspicions)
    for (const auto& m : s.triggered) {
      ++hist[m.rule_id];
      ++occurrences;
    }
  os << hist.size() << (hist.size() == 1 ? " regra acionada, " : " regras acionadas, ") << occurrences
     << (occurrences == 1 ? " ocorrência" : " ocorrências") << ":\n";
  {
    std::vector<std::string> cells;
    for (const auto& [id, c] : hist) cells.push_back(id + " - " + std::to_string(c));
    const std::size_t rows = (cells.size() + 2) / 3;
    for (std::size_t r = 0; r < rows; ++r) {
      std::string line;
      for (std::size_t c = 0; c < 3; ++c) {
        std::size_t i = c * rows + r;
        if (i >= cells.size()) break;
        if (c > 0) line += "  ";
        line += (c < 2 && (c + 1) * rows + r < cells.size()) ? pad_right(cells[i], 20) : cells[i];
      }
      os << line << "\n";
    }
  }

  os << "\nSuspeitos por regra:\n";
  for (const auto& [id, ordinals] : run.by_rule) {
    os << id << ":";
    for (std::size_t i = 0; i < ordinals.size(); ++i) os << (i ? ", " : " ") << ordinals[i];
    os << "\n";
  }

  std::vector<std::size_t> listed;
  if (options.rule) {
    if (auto it = run.by_rule.find(*options.rule); it != run.by_rule.end()) listed = it->second;
  } else {
    for (std::size_t i = 1; i <= n; ++i) listed.push_back(i);
  }
  os << "\nSuspeitos listados: " << listed.size() << " de " << n << ", regra: "
     << (options.rule ? *options.rule : std::string("todas")) << "\n";
  for (std::size_t ord : listed) {
    const auto& s = run.suspicions[ord - 1];
    auto id_text = [&](const std::string& v) { return options.mask ? std::string(kMask) : v; };
    os << "Suspeito " << ord << " / " << n << "  Cliente-" << id_text(s.key.client_id) << " Agência-"
       << id_text(s.key.agency) << " Conta-" << id_text(s.key.account) << " ("
       << s.profile.account_age_years << (s.profile.account_age_years == 1 ? " ano" : " anos")
       << ") Classe-" << class_label(s.analysis_class) << " (original " << class_label(s.original_class)
       << ")\n";
    os << "(atributo - total anual / máximo mensal / valor no mês)\n";
    using profiler::Attribute;
    constexpr std::pair<Attribute, std::optional<Attribute>> rows[] = {
        {Attribute::Serv, Attribute::Movl},     {Attribute::Band1, Attribute::Band4},
        {Attribute::Band2, Attribute::Band5},   {Attribute::Band3, Attribute::Band6},
        {Attribute::PctDeb, Attribute::PctTed}, {Attribute::PctDoc, std::nullopt}};
    auto cell = [&](Attribute a) {
      const auto& t = s.profile[a];
      const bool pct = profiler::is_percent(a);
      return std::string(profiler::display_name(a)) + " - " + value_text(t.annual_total, pct) + " / " +
             value_text(t.monthly_max, pct) + " / " + value_text(t.window_value, pct);
    };
    for (const auto& [a, b] : rows) {
      std::string line = cell(a);
      if (b) line = pad_right(line, 30) + "  " + cell(*b);
      os << line << "\n";
    }
    for (const auto& m : s.triggered) {
      os << m.rule_id;
      if (auto it = run.rule_texts.find(m.rule_id); it != run.rule_texts.end()) {
        os << " - " << it->second.text;
        if (!it->second.citation.empty()) os << " (" << it->second.citation << ")";
      }
      os << "\n";
    }
    os << "-----\n";
  }
  os << "\n== Análise concluída em " << run.finished_at << "\n";
  return os.str();
}

std::string render_reports(const AnalysisRun& run, const ReportOptions& options) {
  return render_capture_report(run) + "\n" + render_analysis_report(run, options);
}

}  // namespace aml::service

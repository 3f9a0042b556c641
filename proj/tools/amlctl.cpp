// amlctl: command line front of the capture service.

#include "aml/datagen.hpp"
#include "aml/service/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <iostream>

using namespace aml;
using namespace aml::service;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

Date date_arg(const std::string& s) {
  auto d = parse_date(s);
  if (!d) throw ConfigError("bad date '" + s + "', expected YYYY-MM-DD");
  return *d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"amlctl - suspicious transaction capture"};
  app.require_subcommand(1);
  std::string data_dir;
  app.add_option("-d,--data-dir", data_dir, "data directory (default $AML_DATA_DIR or ./aml-data)");
  std::string reference;
  app.add_option("--reference", reference, "first month of the reference cycle, YYYY-MM");

  auto* gen = app.add_subcommand("datagen", "write a synthetic population to <data>/input");
  std::string gen_config;
  int gen_clients = 0;
  std::uint64_t gen_seed = 0;
  bool gen_gzip = false, gen_dump = false;
  gen->add_option("--config", gen_config, "generator config file (key = value)");
  gen->add_option("--clients", gen_clients, "number of clients");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_flag("--gzip", gen_gzip, "compress the csv files");
  gen->add_flag("--print-config", gen_dump, "print the effective config and exit");

  auto* learn = app.add_subcommand("learn", "learn a model bundle from <data>/input");
  int learn_k = 0;
  learn->add_option("--k", learn_k, "fixed number of clusters for both segments");

  auto* cap = app.add_subcommand("capture", "run the three phases for one analysis date");
  std::string cap_date, cap_product{agents::kAllProducts}, cap_client;
  double cap_mar = 0;
  bool cap_base = false, cap_report = false, unmask = false;
  cap->add_option("--date", cap_date, "analysis date YYYY-MM-DD")->required();
  cap->add_option("--mar", cap_mar, "additional risk margin, percent");
  cap->add_flag("--no-margin", cap_base, "raw limits, no MAR arithmetic");
  cap->add_option("--product", cap_product, "one product line");
  cap->add_option("--client", cap_client, "one client");
  cap->add_flag("--report", cap_report, "print the report afterwards");
  cap->add_flag("--unmask", unmask, "show client identifiers");

  auto* rep = app.add_subcommand("report", "print the reports of a stored run");
  std::string rep_run, rep_rule;
  rep->add_option("--run", rep_run, "run id (default: latest)");
  rep->add_option("--rule", rep_rule, "list only the suspects of one rule");
  rep->add_flag("--unmask", unmask, "show client identifiers");

  auto* runs = app.add_subcommand("runs", "list stored runs");

  auto* serve = app.add_subcommand("serve", "HTTP API under /api/v1");
  int port = 8080;
  std::string host = "127.0.0.1", token;
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--token", token, "required bearer token (default $AML_API_TOKEN)");
  serve->add_flag("--unmask", unmask, "show client identifiers");

  auto* evolve = app.add_subcommand("evolve", "compare the next cycle with the base and suggest profiles");
  bool evolve_accept = false;
  evolve->add_flag("--accept-all", evolve_accept, "accept every candidate and write the new bundle");

  CLI11_PARSE(app, argc, argv);

  try {
    auto layout = DataLayout::resolve(data_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(data_dir));
    std::optional<YearMonth> ref;
    if (!reference.empty()) {
      ref = parse_year_month(reference);
      if (!ref) throw ConfigError("bad --reference, expected YYYY-MM");
    }
    ServiceConfig cfg;
    cfg.layout = layout;
    cfg.mask = !unmask;
    cfg.reference_first = ref;

    if (*gen) {
      auto gc = gen_config.empty() ? datagen::GeneratorConfig::defaults() : datagen::GeneratorConfig::load(gen_config);
      if (gen_clients > 0) gc.clients = gen_clients;
      if (gen->count("--seed")) gc.seed = gen_seed;
      gc.validate();
      if (gen_dump) {
        std::cout << gc.to_text();
        return 0;
      }
      auto ds = datagen::generate(gc);
      datagen::emit(ds, layout.input(), {gen_gzip});
      std::cout << ds.clients.size() << " clients, " << ds.transactions.size() << " transactions, "
                << ds.truth.size() << " planted accounts -> " << layout.input().string() << "\n";
    } else if (*learn) {
      LearnSettings s;
      if (learn_k > 0) s.singular.k = s.entity.k = learn_k;
      auto r = learn_workspace(layout, s, ref);
      std::cout << "model " << r.bundle.version.to_string() << " -> " << r.written_to.string() << "\n";
      for (const auto& [kind, m] : r.bundle.segments)
        std::cout << "  " << to_string(kind) << ": k=" << m.clustering.centroids.rows() << ", "
                  << m.rules.rules.size() << " rules, accuracy " << m.training_accuracy << "\n";
      if (r.bank_written) std::cout << "bank -> " << r.bank_written->string() << "\n";
      if (r.input_problems) std::cout << r.input_problems << " input lines rejected\n";
    } else if (*cap) {
      Service svc(cfg);
      RunRequest rq;
      rq.analysis_date = date_arg(cap_date);
      rq.mar = cap_base ? std::nullopt : std::optional<double>(cap_mar);
      rq.product = cap_product;
      if (!cap_client.empty()) rq.client_id = cap_client;
      bool reused = false;
      auto run = svc.run_analysis(rq, &reused);
      std::cout << (reused ? "stored run " : "run ") << run.id << ": " << run.suspicions.size()
                << " suspicions of " << run.analyzed << " profiles\n";
      if (cap_report) std::cout << "\n" << svc.report(run.id);
    } else if (*rep) {
      Service svc(cfg);
      if (rep_run.empty()) {
        auto ids = svc.run_ids();
        if (ids.empty()) throw NotFoundError("no stored runs");
        rep_run = ids.back();
      }
      std::cout << svc.report(rep_run, rep_rule.empty() ? std::nullopt : std::optional(rep_rule));
    } else if (*runs) {
      Service svc(cfg);
      for (const auto& id : svc.run_ids()) {
        auto r = svc.get_run(id);
        std::cout << id << "  " << r.suspicions.size() << "/" << r.analyzed << "\n";
      }
    } else if (*serve) {
      if (token.empty())
        if (const char* t = std::getenv("AML_API_TOKEN")) token = t;
      if (!token.empty()) cfg.token = token;
      Service svc(cfg);
      svc.ensure_ready();
      auto server = make_http_server(svc);
      g_server = server.get();
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      std::cout << "listening on " << host << ":" << port << "\n" << std::flush;
      if (!server->listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*evolve) {
      Service svc(cfg);
      auto s = svc.suggest_profiles();
      std::cout << s.suggestion_id << ": " << s.note << "\n";
      for (const auto& c : s.candidates)
        std::cout << "  " << c.id << " " << to_string(c.segment)
                  << (c.kind == agents::ProfileCandidate::Kind::NewProfile ? " new profile" : " shifted cluster ")
                  << (c.kind == agents::ProfileCandidate::Kind::Shifted ? std::to_string(c.cluster) : "")
                  << " support " << c.support << " distance " << c.distance << " -> "
                  << to_string(c.proposed_class) << "\n";
      if (evolve_accept && !s.candidates.empty()) {
        agents::ProfileValidation v{s.suggestion_id, {}, {}};
        for (const auto& c : s.candidates) v.accepted.push_back(c.id);
        std::cout << "model " << svc.validate_profiles(v).to_string() << "\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "setup: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "destiny/experiment.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace destiny {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

[[noreturn]] void fail(const std::string& where, std::size_t line,
                       const std::string& msg) {
  throw std::runtime_error(where + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& where, std::size_t line,
                    const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    fail(where, line, "key '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& where, std::size_t line,
                       const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    fail(where, line, "key '" + key + "': not an integer: '" + value + "'");
  }
  return v;
}

const char* family_name(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::Pca: return "pca";
    case ProblemFamily::Olsr: return "olsr";
    case ProblemFamily::Sdl: return "sdl";
  }
  return "?";
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "Converged";
    case RunStatus::MaxRounds: return "MaxRounds";
    case RunStatus::Diverged: return "Diverged";
  }
  return "?";
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name) {
  ExperimentConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(name, lineno, "expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) fail(name, lineno, "empty key");
    if (seen.count(key)) {
      fail(name, lineno, "duplicate key '" + key + "' (first at line " +
                             std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;

    if (key == "problem") {
      if (value == "pca") cfg.problem = ProblemFamily::Pca;
      else if (value == "olsr") cfg.problem = ProblemFamily::Olsr;
      else if (value == "sdl") cfg.problem = ProblemFamily::Sdl;
      else fail(name, lineno, "problem must be pca, olsr or sdl");
    } else if (key == "data") {
      if (value == "synthetic") cfg.data = DataSource::Synthetic;
      else if (value == "csv") cfg.data = DataSource::Csv;
      else fail(name, lineno, "data must be synthetic or csv");
    } else if (key == "n") {
      cfg.n = static_cast<int>(parse_int(name, lineno, key, value));
      if (cfg.n < 1) fail(name, lineno, "n must be positive");
    } else if (key == "m") {
      cfg.m = static_cast<int>(parse_int(name, lineno, key, value));
      if (cfg.m < 1) fail(name, lineno, "m must be positive");
    } else if (key == "p") {
      cfg.p = static_cast<int>(parse_int(name, lineno, key, value));
      if (cfg.p < 1) fail(name, lineno, "p must be positive");
    } else if (key == "xi") {
      cfg.xi = parse_double(name, lineno, key, value);
      if (!(cfg.xi > 0.0 && cfg.xi < 1.0)) {
        fail(name, lineno, "xi must lie in (0, 1)");
      }
    } else if (key == "csv") {
      cfg.csv = value;
    } else if (key == "csv_c") {
      cfg.csv_c = value;
    } else if (key == "csv_d") {
      cfg.csv_d = value;
    } else if (key == "d") {
      cfg.d = static_cast<int>(parse_int(name, lineno, key, value));
      if (cfg.d < 1) fail(name, lineno, "d must be positive");
    } else if (key == "prob") {
      cfg.prob = parse_double(name, lineno, key, value);
      if (!(cfg.prob > 0.0 && cfg.prob <= 1.0)) {
        fail(name, lineno, "prob must lie in (0, 1]");
      }
    } else if (key == "beta") {
      cfg.beta = parse_double(name, lineno, key, value);
      if (!(cfg.beta > 0.0)) fail(name, lineno, "beta must be positive");
    } else if (key == "stepsize") {
      if (value == "bb") cfg.bb = true;
      else if (value == "fixed") cfg.bb = false;
      else fail(name, lineno, "stepsize must be bb or fixed");
    } else if (key == "eta") {
      cfg.eta = parse_double(name, lineno, key, value);
      if (!(cfg.eta > 0.0)) fail(name, lineno, "eta must be positive");
    } else if (key == "eta0") {
      cfg.eta0 = parse_double(name, lineno, key, value);
      if (!(cfg.eta0 > 0.0)) fail(name, lineno, "eta0 must be positive");
    } else if (key == "eta_min") {
      cfg.eta_min = parse_double(name, lineno, key, value);
      if (!(cfg.eta_min > 0.0)) fail(name, lineno, "eta_min must be positive");
    } else if (key == "eta_max") {
      cfg.eta_max = parse_double(name, lineno, key, value);
      if (!(cfg.eta_max > 0.0)) fail(name, lineno, "eta_max must be positive");
    } else if (key == "max_rounds") {
      cfg.max_rounds = static_cast<int>(parse_int(name, lineno, key, value));
      if (cfg.max_rounds < 0) fail(name, lineno, "max_rounds must be >= 0");
    } else if (key == "tol_substationarity") {
      cfg.tol_substationarity = parse_double(name, lineno, key, value);
      if (!(cfg.tol_substationarity > 0.0)) {
        fail(name, lineno, "tol_substationarity must be positive");
      }
    } else if (key == "tol_consensus") {
      cfg.tol_consensus = parse_double(name, lineno, key, value);
      if (!(cfg.tol_consensus > 0.0)) {
        fail(name, lineno, "tol_consensus must be positive");
      }
    } else if (key == "tol_feasibility") {
      cfg.tol_feasibility = parse_double(name, lineno, key, value);
      if (!(cfg.tol_feasibility > 0.0)) {
        fail(name, lineno, "tol_feasibility must be positive");
      }
    } else if (key == "seed") {
      const std::int64_t s = parse_int(name, lineno, key, value);
      if (s < 0) fail(name, lineno, "seed must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "output") {
      if (value.empty()) fail(name, lineno, "output must not be empty");
      cfg.output = value;
    } else if (key == "graph_output") {
      cfg.graph_output = value;
    } else {
      fail(name, lineno, "unknown key '" + key + "'");
    }
  }

  if (!seen.count("problem")) fail(name, lineno, "missing required key 'problem'");
  if (!seen.count("d")) fail(name, lineno, "missing required key 'd'");
  if (cfg.data == DataSource::Synthetic) {
    for (const char* k : {"n", "m", "p"}) {
      if (!seen.count(k)) {
        fail(name, lineno,
             std::string("missing required key '") + k + "' for synthetic data");
      }
    }
    if (cfg.p > cfg.n) fail(name, lineno, "need p <= n");
    if (cfg.problem == ProblemFamily::Pca && cfg.n > cfg.m) {
      fail(name, lineno, "need n <= m for synthetic pca data");
    }
  } else {
    if (!seen.count("p")) {
      fail(name, lineno, "missing required key 'p' for csv data");
    }
    const bool olsr = cfg.problem == ProblemFamily::Olsr;
    if (olsr && (cfg.csv_c.empty() || cfg.csv_d.empty())) {
      fail(name, lineno, "olsr csv data needs keys 'csv_c' and 'csv_d'");
    }
    if (!olsr && cfg.csv.empty()) {
      fail(name, lineno, "csv data needs key 'csv'");
    }
    for (const std::string& path : {cfg.csv, cfg.csv_c, cfg.csv_d}) {
      if (!path.empty() && !std::filesystem::exists(path)) {
        fail(name, lineno, "referenced file does not exist: " + path);
      }
    }
  }
  if (!(cfg.eta_min <= cfg.eta0 && cfg.eta0 <= cfg.eta_max)) {
    fail(name, lineno, "need eta_min <= eta0 <= eta_max");
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  char num[64];
  const auto put = [&](const char* key, double v) {
    std::snprintf(num, sizeof num, "%.17g", v);
    out << key << " = " << num << '\n';
  };
  out << "problem = " << family_name(cfg.problem) << '\n';
  out << "data = "
      << (cfg.data == DataSource::Synthetic ? "synthetic" : "csv") << '\n';
  if (cfg.data == DataSource::Synthetic) {
    out << "n = " << cfg.n << '\n';
    out << "m = " << cfg.m << '\n';
    out << "p = " << cfg.p << '\n';
    put("xi", cfg.xi);
  } else {
    out << "p = " << cfg.p << '\n';
    if (!cfg.csv.empty()) out << "csv = " << cfg.csv << '\n';
    if (!cfg.csv_c.empty()) out << "csv_c = " << cfg.csv_c << '\n';
    if (!cfg.csv_d.empty()) out << "csv_d = " << cfg.csv_d << '\n';
  }
  out << "d = " << cfg.d << '\n';
  put("prob", cfg.prob);
  put("beta", cfg.beta);
  out << "stepsize = " << (cfg.bb ? "bb" : "fixed") << '\n';
  put("eta", cfg.eta);
  put("eta0", cfg.eta0);
  put("eta_min", cfg.eta_min);
  put("eta_max", cfg.eta_max);
  out << "max_rounds = " << cfg.max_rounds << '\n';
  put("tol_substationarity", cfg.tol_substationarity);
  put("tol_consensus", cfg.tol_consensus);
  put("tol_feasibility", cfg.tol_feasibility);
  out << "seed = " << cfg.seed << '\n';
  out << "output = " << cfg.output << '\n';
  if (!cfg.graph_output.empty()) {
    out << "graph_output = " << cfg.graph_output << '\n';
  }
  return out.str();
}

void write_trace_csv(const std::vector<TraceRow>& trace,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "round,substationarity,consensus,feasibility,h_value,eta_min,"
         "eta_max,elapsed_s\n";
  char buf[192];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e\n", r.round,
                  r.substationarity, r.consensus, r.feasibility, r.h_value,
                  r.eta_min, r.eta_max, r.elapsed_s);
    out << buf;
  }
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

namespace {

struct Assembled {
  ObjectiveList objectives;
  int n = 0;
  int p = 0;
};

Assembled assemble_objectives(const ExperimentConfig& cfg) {
  Assembled a;
  a.p = cfg.p;
  switch (cfg.problem) {
    case ProblemFamily::Pca: {
      RealMatrix A;
      if (cfg.data == DataSource::Synthetic) {
        SyntheticSpec spec{cfg.n, cfg.m, cfg.p, cfg.xi, cfg.seed};
        A = generate_synthetic_pca(spec);
      } else {
        A = load_matrix_csv(cfg.csv);
      }
      a.n = static_cast<int>(A.rows());
      a.objectives = make_pca_agents(A, cfg.d, cfg.p);
      break;
    }
    case ProblemFamily::Olsr: {
      RealMatrix C;
      RealMatrix D;
      if (cfg.data == DataSource::Synthetic) {
        OlsrData data = generate_synthetic_olsr(cfg.n, cfg.m, cfg.p, cfg.seed);
        C = std::move(data.C);
        D = std::move(data.D);
      } else {
        C = load_matrix_csv(cfg.csv_c);
        D = load_matrix_csv(cfg.csv_d);
        if (D.rows() != cfg.p) {
          throw std::runtime_error("csv_d row count " +
                                   std::to_string(D.rows()) +
                                   " does not match p = " +
                                   std::to_string(cfg.p));
        }
      }
      a.n = static_cast<int>(C.rows());
      a.objectives = make_olsr_agents(C, D, cfg.d);
      break;
    }
    case ProblemFamily::Sdl: {
      RealMatrix B;
      if (cfg.data == DataSource::Synthetic) {
        B = generate_synthetic_sdl(cfg.n, cfg.m, cfg.seed);
      } else {
        B = load_matrix_csv(cfg.csv);
      }
      a.n = static_cast<int>(B.rows());
      a.objectives = make_sdl_agents(B, cfg.d, cfg.p);
      break;
    }
  }
  return a;
}

StiefelPoint seeded_initial_point(int n, int p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RealMatrix M(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) M(i, j) = gauss(rng);
  }
  return orthonormalize(M);
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  MixingMatrix mix{RealMatrix(), 0.0};
  RunResult result;
  try {
    Assembled a = assemble_objectives(cfg);
    // Derived seed streams: data uses seed, the graph seed + 1, the
    // initial point seed + 2.
    const Graph graph = erdos_renyi(cfg.d, cfg.prob, cfg.seed + 1);
    mix = metropolis_weights(graph);
    std::printf("network: d=%d edges=%zu lambda=%.6g\n", cfg.d,
                graph.edges.size(), mix.lambda);

    const StiefelPoint x0 = seeded_initial_point(a.n, a.p, cfg.seed + 2);

    RunConfig rc{PenaltyParam(cfg.beta),
                 cfg.bb ? StepsizeRule(BBStep{cfg.eta0, cfg.eta_min,
                                              cfg.eta_max})
                        : StepsizeRule(FixedStep{cfg.eta}),
                 cfg.max_rounds,
                 cfg.tol_substationarity,
                 cfg.tol_consensus,
                 cfg.tol_feasibility,
                 cfg.seed};
    result = run(rc, mix, a.objectives, x0);

    write_trace_csv(result.trace, cfg.output);
    if (!cfg.graph_output.empty()) save_edge_list(graph, cfg.graph_output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  if (result.trace.empty()) {
    std::printf("status=%s rounds=0 lambda=%.6g trace=%s\n",
                status_name(result.status), mix.lambda, cfg.output.c_str());
  } else {
    const TraceRow& last = result.trace.back();
    std::printf(
        "status=%s rounds=%zu lambda=%.6g substationarity=%.6g%s "
        "consensus=%.6g feasibility=%.6g h=%.9g trace=%s\n",
        status_name(result.status), result.trace.size(), mix.lambda,
        last.substationarity,
        result.absolute_substationarity ? " (absolute)" : "", last.consensus,
        last.feasibility, last.h_value, cfg.output.c_str());
  }
  if (result.status == RunStatus::Diverged) {
    std::cerr << "diverged: " << result.message << '\n';
  }

  switch (result.status) {
    case RunStatus::Converged: return 0;
    case RunStatus::MaxRounds: return 2;
    case RunStatus::Diverged: return 3;
  }
  return 1;
}

int verify_experiment(const ExperimentConfig& cfg) {
  try {
    const Graph graph = erdos_renyi(cfg.d, cfg.prob, cfg.seed + 1);
    const MixingMatrix mix = metropolis_weights(graph);
    const MixingReport report = verify_mixing_matrix(mix.W, graph);
    const auto show = [](const char* name, const ConditionCheck& c) {
      std::printf("%-14s %s  worst violation %.3e\n", name,
                  c.pass ? "pass" : "FAIL", c.worst);
    };
    show("symmetry", report.symmetry);
    show("stochasticity", report.stochasticity);
    show("nonnegativity", report.nonnegativity);
    show("pattern", report.pattern);
    std::printf("lambda = %.12g (%s)\n", mix.lambda,
                mix.lambda < 1.0 ? "valid" : "INVALID");
    return report.all_pass() && mix.lambda < 1.0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace destiny

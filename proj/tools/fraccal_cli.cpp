// fraccal command-line driver: forward solves, reconstructions, noise sweeps
// and stencil dumps for the built-in examples.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraccal/forward.hpp"
#include "fraccal/harness.hpp"
#include "fraccal/stencil.hpp"

namespace {

using json = nlohmann::json;
using namespace fraccal;

// Raw flag values; applied through ExperimentConfig::set so that flags,
// config files and environment variables share one parser.
struct Flags {
  std::map<std::string, std::string> values;
  std::string config_path;
  bool allow_inverse_crime = false;
  std::optional<double> s;
};

void add_common(CLI::App* app, Flags& f) {
  auto opt = [&](const std::string& name, const std::string& help) {
    app->add_option_function<std::string>(
        "--" + name, [&f, name](const std::string& v) { f.values[name] = v; }, help);
  };
  app->add_option("--config", f.config_path, "key=value configuration file");
  opt("example", "preset: ex4.1, ex4.2, ex4.3, ex4.4 or custom");
  opt("delta", "noise level");
  opt("alpha", "explicit regularization parameter");
  opt("alpha-rule", "parameter rule, e.g. 0.1*delta^2");
  opt("seed", "noise seed");
  opt("N", "inversion grid cells per unit direction");
  opt("data-N", "data grid cells (multiple of N)");
  opt("gamma", "splitting parameter in (2s, 2]");
  opt("eps", "gap between the domain and the exterior sets");
  opt("out", "output directory");
  opt("format", "csv or json");
  opt("max-iter", "maximum outer iterations");
  opt("rtol", "inner Krylov relative tolerance");
  opt("deltas", "comma-separated sweep noise levels");
  app->add_flag("--allow-inverse-crime", f.allow_inverse_crime, "permit data-N < 2N");
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = load_config(f.config_path, cfg);
  cfg = apply_environment(cfg);
  for (const auto& [k, v] : f.values) cfg.set(k, v);
  if (f.allow_inverse_crime) cfg.allow_inverse_crime = true;
  return cfg;
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

json record_summary(const RunRecord& rec) {
  return {{"example", rec.preset},
          {"delta", rec.delta},
          {"alpha", rec.alpha},
          {"seed", rec.seed},
          {"N", rec.N},
          {"data_N", rec.data_N},
          {"iterations", rec.iterations},
          {"stop_reason", rec.stop_reason},
          {"E_final", rec.E_final},
          {"stop_threshold", rec.stop_threshold},
          {"linf_error", rec.linf_error},
          {"l2_error", rec.l2_error},
          {"seconds", rec.data_seconds + rec.inversion_seconds},
          {"outputs", rec.outputs}};
}

int cmd_reconstruct(const Flags& f) {
  const auto cfg = resolve(f);
  auto rec = run_experiment(cfg);
  if (!cfg.out_dir.empty()) export_record(rec, cfg);
  emit(record_summary(rec));
  return 0;
}

int cmd_sweep(const Flags& f) {
  const auto cfg = resolve(f);
  std::vector<RunRecord> records;
  const auto rows = stability_sweep(cfg, &records);
  std::vector<std::string> outputs;
  if (!cfg.out_dir.empty()) {
    outputs = export_sweep(rows, cfg);
    for (auto& r : records) {
      export_record(r, cfg);
      outputs.insert(outputs.end(), r.outputs.begin(), r.outputs.end());
    }
  }
  std::vector<double> a;
  std::vector<double> b;
  json jr = json::array();
  for (const auto& r : rows) {
    jr.push_back({{"delta", r.delta},
                  {"inv_log_delta", r.inv_log_delta},
                  {"linf_error", r.linf_error},
                  {"l2_error", r.l2_error},
                  {"iterations", r.iterations},
                  {"error", r.error}});
    if (r.error.empty()) {
      a.push_back(r.inv_log_delta);
      b.push_back(r.linf_error);
    }
  }
  json out = {{"example", cfg.example}, {"rows", jr}, {"outputs", outputs}};
  out["pearson"] = a.size() >= 2 ? json(pearson(a, b)) : json(nullptr);
  emit(out);
  return 0;
}

int cmd_solve_forward(const Flags& f) {
  const auto cfg = resolve(f);
  auto preset = make_preset(parse_preset(cfg.example));
  if (cfg.gamma) preset.gamma = *cfg.gamma;
  if (cfg.eps) preset.eps = *cfg.eps;
  const int N = cfg.N ? *cfg.N : preset.N;
  const double gap = preset.eps > 0.0 ? preset.eps : 2.0 * preset.L / N;
  ProblemSpec spec = build_spec(preset, N, gap);
  const Grid& g = spec.grid;
  const int jlo = g.dim() == 2 ? 1 : 0;
  const int jhi = g.dim() == 2 ? g.N() - 1 : 0;
  for (int j = jlo; j <= jhi; ++j)
    for (int i = 1; i < g.N(); ++i)
      spec.q[g.interior_index(i, j)] = preset.q_true(g.coord(i), g.dim() == 2 ? g.coord(j) : 0.0);

  KrylovOptions kopts;
  kopts.rtol = cfg.rtol;
  ForwardModel model(spec, kopts);
  const auto sol = model.solve(spec.q);
  require_converged(sol.report, "forward solve");
  const auto obs = model.observe(sol.u.interior());

  std::vector<std::string> outputs;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    const int ylo = 0;
    const int yhi = g.dim() == 2 ? g.N() : 0;
    if (cfg.format == "json") {
      json j;
      json nodes = json::array();
      for (int jj = ylo; jj <= yhi; ++jj)
        for (int i = 0; i <= g.N(); ++i) {
          json n = {{"x", g.coord(i)}, {"u", sol.u.at(i, jj)}};
          if (g.dim() == 2) n["y"] = g.coord(jj);
          nodes.push_back(n);
        }
      json w2 = json::array();
      for (std::size_t k = 0; k < spec.W2.size(); ++k) {
        json n = {{"x", g.coord(spec.W2[k].i)}, {"value", obs[k]}};
        if (g.dim() == 2) n["y"] = g.coord(spec.W2[k].j);
        w2.push_back(n);
      }
      j["solution"] = nodes;
      j["observation"] = w2;
      const auto path = dir / (cfg.example + "_forward.json");
      std::ofstream(path) << j.dump(1) << '\n';
      outputs.push_back(path.string());
    } else {
      const auto upath = dir / (cfg.example + "_forward.csv");
      std::ofstream us(upath);
      us.precision(17);
      us << (g.dim() == 2 ? "x,y,u\n" : "x,u\n");
      for (int jj = ylo; jj <= yhi; ++jj)
        for (int i = 0; i <= g.N(); ++i) {
          us << g.coord(i) << ',';
          if (g.dim() == 2) us << g.coord(jj) << ',';
          us << sol.u.at(i, jj) << '\n';
        }
      const auto opath = dir / (cfg.example + "_observation.csv");
      std::ofstream os(opath);
      os.precision(17);
      os << (g.dim() == 2 ? "x,y,value\n" : "x,value\n");
      for (std::size_t k = 0; k < spec.W2.size(); ++k) {
        os << g.coord(spec.W2[k].i) << ',';
        if (g.dim() == 2) os << g.coord(spec.W2[k].j) << ',';
        os << obs[k] << '\n';
      }
      outputs = {upath.string(), opath.string()};
    }
  }
  emit({{"example", cfg.example},
        {"N", N},
        {"W2_points", spec.W2.size()},
        {"krylov", to_string(sol.report.method)},
        {"iterations", sol.report.iterations},
        {"relative_residual", sol.report.rhs_norm > 0 ? sol.report.final_residual / sol.report.rhs_norm : 0.0},
        {"eps_R", sol.eps_R},
        {"outputs", outputs}});
  return 0;
}

int cmd_dump_stencil(const Flags& f) {
  const auto cfg = resolve(f);
  const auto preset = make_preset(parse_preset(cfg.example));
  StencilParams p;
  p.dim = preset.dim;
  p.s = f.s ? *f.s : preset.s;
  p.gamma = cfg.gamma ? *cfg.gamma : preset.gamma;
  p.L = preset.L;
  p.R = preset.R;
  p.N = cfg.N ? *cfg.N : preset.N;
  const auto sym = stencil_symbol(p);
  std::string path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    path = (std::filesystem::path(cfg.out_dir) / (cfg.example + "_stencil.txt")).string();
    std::ofstream os(path);
    write_symbol(os, *sym);
    if (!os) throw std::runtime_error("cannot write " + path);
  } else {
    write_symbol(std::cout, *sym);
    return 0;
  }
  emit({{"dim", sym->dim},
        {"s", sym->s},
        {"gamma", sym->gamma},
        {"N", sym->N},
        {"a00", sym->a00()},
        {"row_sum", sym->row_sum()},
        {"tail", sym->tail},
        {"outputs", json::array({path})}});
  return 0;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional Schrodinger forward solver and potential reconstruction"};
  app.require_subcommand(1);
  Flags flags;
  auto* fwd = app.add_subcommand("solve-forward", "solve the forward problem at the preset potential");
  auto* rec = app.add_subcommand("reconstruct", "reconstruct q from one noisy exterior measurement");
  auto* swp = app.add_subcommand("sweep", "reconstruct over several noise levels");
  auto* dmp = app.add_subcommand("dump-stencil", "write the stencil weights");
  for (auto* c : {fwd, rec, swp, dmp}) add_common(c, flags);
  dmp->add_option_function<double>("--s", [&flags](double v) { flags.s = v; }, "fractional order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (fwd->parsed()) return cmd_solve_forward(flags);
    if (rec->parsed()) return cmd_reconstruct(flags);
    if (swp->parsed()) return cmd_sweep(flags);
    if (dmp->parsed()) return cmd_dump_stencil(flags);
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what(), 2);
  } catch (const SolverError& e) {
    return fail("solver", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return fail("usage", "no subcommand", 2);
}

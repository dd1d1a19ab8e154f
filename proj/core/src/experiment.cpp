#include "ksd/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "ksd/ensemble.hpp"
#include "ksd/entropy.hpp"
#include "ksd/errors.hpp"
#include "ksd/lyapunov.hpp"
#include "ksd/oracle.hpp"
#include "ksd/parallel.hpp"
#include "ksd/partition.hpp"
#include "ksd/systems.hpp"
#include "ksd/thermo.hpp"

namespace ksd {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Index of the orbit substream used for the Lyapunov starting point;
// partition i of the KSE family uses index i.
constexpr std::uint64_t kLyapunovStart = 1u << 20;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  CsvWriter& operator<<(const std::string& s) { return cell(s); }
  CsvWriter& operator<<(double x) { return cell(format_real(x)); }
  CsvWriter& operator<<(int x) { return cell(std::to_string(x)); }
  CsvWriter& operator<<(std::size_t x) { return cell(std::to_string(x)); }
  CsvWriter& operator<<(bool b) { return cell(b ? "1" : "0"); }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& cell(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  bool first_ = true;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.stderr}}; }

struct Context {
  Config config;
  RunOptions options;
  std::uint64_t seed = 0;
  std::string hash;
  RunResult result;

  fs::path file(const std::string& name) {
    result.files.push_back(name);
    return options.out / name;
  }
  void check(std::string name, bool pass, double value, double threshold, std::string detail) {
    if (!pass) spdlog::warn("check {} failed: {}", name, detail);
    result.checks.push_back({std::move(name), pass, value, threshold, std::move(detail)});
  }
  std::optional<double> opt_real(const std::string& key) const {
    return config.has(key) ? std::optional<double>(config.real(key)) : std::nullopt;
  }
  std::size_t count(const std::string& key, const std::string& fallback) const {
    return std::size_t(config.integer(config.has(key) ? key : fallback));
  }
};

std::vector<Partition> make_partitions(const SystemModel& system, const std::vector<std::string>& specs) {
  std::vector<Partition> out;
  std::set<std::string> ids;
  for (const auto& text : specs) {
    out.push_back(make_partition(system, PartitionSpec::parse(text)));
    if (!ids.insert(out.back().id()).second) throw ConfigError("partition listed twice: " + out.back().id());
  }
  return out;
}

const std::vector<std::string>& required_partitions(const Config& config) {
  if (!config.has("partitions")) throw ConfigError("missing required config key 'partitions'");
  return config.strings("partitions");
}

CurveOptions curve_options(const Config& config) {
  return {config.boolean("kse.miller_madow"), config.real("kse.min_mean_count")};
}

// ---------------------------------------------------------------- kse

KseEstimate run_kse(Context& ctx, const SystemModel& system, const ControlProtocol& protocol) {
  const Config& cfg = ctx.config;
  const auto& specs = cfg.has("kse.partitions") ? cfg.strings("kse.partitions") : required_partitions(cfg);
  const auto family = make_partitions(system, specs);
  const int max_length = int(cfg.integer("kse.max_length"));
  const double lambda = protocol.initial();
  if (!protocol.is_constant()) throw ConfigError("symbolic KSE needs an undriven protocol");

  std::vector<PathStats> stats(family.size());
  if (cfg.string("kse.method") == "orbit") {
    const auto windows = std::size_t(cfg.integer("kse.windows"));
    const auto burn_in = std::size_t(cfg.integer("kse.burn_in"));
    spdlog::info("kse: {} orbit windows on {} partitions", windows, family.size());
    parallel_for(family.size(), ctx.options.threads, [&](std::size_t i) {
      Engine rng = substream(ctx.seed, Stream::kOrbit, i);
      const PhaseState s0 = system.sample_uniform(rng);
      stats[i] = collect_orbit_stats(system, lambda, family[i], s0, windows, max_length - 1, burn_in);
    });
  } else {
    const CanonicalSpec spec{cfg.real("beta"), lambda, ctx.count("kse.samples", "samples"), ctx.seed};
    spdlog::info("kse: {} trajectories on {} partitions", spec.samples, family.size());
    const Ensemble ensemble = sample_canonical(system, spec, ctx.options.threads);
    const auto flat = ControlProtocol::constant(lambda, max_length - 1);
    for (std::size_t i = 0; i < family.size(); ++i)
      stats[i] = collect_path_stats(system, flat, family[i], ensemble, max_length - 1, ctx.options.threads);
  }

  std::vector<NamedCurve> curves;
  for (std::size_t i = 0; i < family.size(); ++i)
    curves.push_back({family[i].id(), block_entropy_curve(stats[i], curve_options(cfg))});

  CsvWriter csv(ctx.file("entropy_curve.csv"), {"partition_id", "t", "H_t", "dH_t", "flagged"});
  for (const auto& c : curves) {
    for (int L = 1; L <= c.curve.max_length(); ++L) {
      csv << c.partition_id << L << c.curve.at(L) << c.curve.increment(L) << bool(c.curve.flagged[std::size_t(L - 1)]);
      csv.end();
    }
  }

  KseOptions kopt;
  kopt.tail = int(cfg.integer("kse.tail"));
  const KseEstimate est = kse_estimate(curves, kopt);
  json parts = json::array();
  for (const auto& p : est.partitions) {
    parts.push_back({{"partition_id", p.partition_id},
                     {"cells", p.cells},
                     {"reliable", p.reliable},
                     {"reliable_length", p.reliable_length},
                     {"window", {p.window_first, p.window_last}},
                     {"rate", p.rate},
                     {"spread", p.spread},
                     {"quotient", p.quotient},
                     {"agreement_gap", p.agreement_gap},
                     {"agree", p.agree}});
  }
  write_json(ctx.file("kse_summary.json"), {{"h", est.h},
                                            {"stderr", est.stderr},
                                            {"best_partition", est.best_partition},
                                            {"family", est.family},
                                            {"rule", est.rule},
                                            {"method", cfg.string("kse.method")},
                                            {"partitions", parts},
                                            {"config_hash", ctx.hash}});
  if (auto lo = ctx.opt_real("expect.kse_min"))
    ctx.check("kse_min", est.h >= *lo, est.h, *lo, "symbolic KSE " + format_real(est.h) + " >= " + format_real(*lo));
  if (auto hi = ctx.opt_real("expect.kse_max"))
    ctx.check("kse_max", est.h <= *hi, est.h, *hi, "symbolic KSE " + format_real(est.h) + " <= " + format_real(*hi));
  spdlog::info("kse: h = {:.6f} on {}", est.h, est.best_partition);
  return est;
}

// ---------------------------------------------------------------- lyapunov

LyapunovReport run_lyapunov(Context& ctx, const SystemModel& system, const ControlProtocol& protocol) {
  const Config& cfg = ctx.config;
  LyapunovOptions opt;
  opt.iterations = std::size_t(cfg.integer("lyapunov.iterations"));
  opt.reorth_period = int(cfg.integer("lyapunov.period"));
  opt.transient = std::size_t(cfg.integer("lyapunov.transient"));
  opt.trace_every = std::size_t(cfg.integer("lyapunov.trace_every"));
  opt.seed = ctx.seed;
  Engine rng = substream(ctx.seed, Stream::kOrbit, kLyapunovStart);
  const PhaseState s0 = system.sample_uniform(rng);
  spdlog::info("lyapunov: {} iterations", opt.iterations);
  const LyapunovReport report = lyapunov_spectrum(system, protocol.initial(), s0, opt);

  const std::size_t n = report.exponents.size();
  std::vector<std::string> header{"iteration"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("lambda_" + std::to_string(i + 1));
  CsvWriter csv(ctx.file("lyapunov_trace.csv"), header);
  for (const auto& h : report.history) {
    csv << h.iteration;
    for (double x : h.exponents) csv << x;
    csv.end();
  }
  double sum = 0.0;
  for (double x : report.exponents) sum += x;
  json pesin = nullptr;
  if (report.converged()) pesin = pesin_kse(report);
  const bool chaotic_regime = system.name() != "kicked_top" || cfg.real("kappa") >= 5.0;
  write_json(ctx.file("lyapunov.json"), {{"exponents", report.exponents},
                                         {"iterations", report.iterations},
                                         {"reorth_period", report.reorth_period},
                                         {"transient", opt.transient},
                                         {"leading_stderr", report.leading_stderr},
                                         {"exponent_sum", sum},
                                         {"converged", report.converged()},
                                         {"pesin_kse", pesin},
                                         {"fully_chaotic_regime", chaotic_regime},
                                         {"config_hash", ctx.hash}});
  if (system.tangent_dimension() == 2)
    ctx.check("lyapunov_area_preserving", std::abs(sum) <= 1e-3, sum, 1e-3,
              "sum of exponents " + format_real(sum));
  if (!chaotic_regime) spdlog::warn("kappa < 5: Pesin identity not expected to hold");
  return report;
}

// ---------------------------------------------------------------- h

Estimate resolve_h(Context& ctx, const SystemModel& system, const ControlProtocol& protocol,
                   std::optional<KseEstimate>& kse) {
  const Config& cfg = ctx.config;
  const std::string& source = cfg.string("h_source");
  Estimate h;
  if (source == "value") {
    if (!cfg.has("h_value")) throw ConfigError("h_source = value needs h_value");
    h = {cfg.real("h_value"), cfg.real("h_error")};
  } else if (source == "pesin") {
    const auto report = run_lyapunov(ctx, system, protocol);
    h = {pesin_kse(report), report.leading_stderr};
  } else {
    kse = run_kse(ctx, system, protocol);
    h = {kse->h, kse->stderr};
  }
  if (auto lo = ctx.opt_real("expect.h_min"))
    ctx.check("h_min", h.value >= *lo, h.value, *lo, source + " h " + format_real(h.value) + " >= " + format_real(*lo));
  if (auto hi = ctx.opt_real("expect.h_max"))
    ctx.check("h_max", h.value <= *hi, h.value, *hi, source + " h " + format_real(h.value) + " <= " + format_real(*hi));
  return h;
}

// ---------------------------------------------------------------- bound

// Smallest gap + tolerance over the steps whose blocks (a_0..a_t) are not
// flagged as undersampled; flagged steps are counted, not tested.
struct AppendixMargin {
  double worst = INFINITY;
  int worst_t = 0;
  int skipped = 0;
};

AppendixMargin appendix_margin(const BoundReport& r) {
  AppendixMargin m;
  for (std::size_t t = 0; t < r.appendix_gap.size(); ++t) {
    if (r.series.curve.flagged.at(t)) {
      ++m.skipped;
      continue;
    }
    const double margin = r.appendix_gap[t] + r.appendix_tolerance[t];
    if (margin < m.worst) {
      m.worst = margin;
      m.worst_t = int(t);
    }
  }
  return m;
}

json bound_json(const BoundReport& r, const std::string& hash) {
  const AppendixMargin am = appendix_margin(r);
  return {{"partition_id", r.partition_id},
          {"system", r.system},
          {"horizon", r.horizon},
          {"lhs", r.lhs.value},
          {"rhs", r.rhs.value},
          {"slack", r.slack.value},
          {"energy_term", r.energy_term.value},
          {"energy_identity", r.energy_identity},
          {"info", r.info.value},
          {"terms",
           {{"h", r.h.value},
            {"c_bar", r.c_bar.value},
            {"d_bar", r.d_bar.value},
            {"entropy_S0", r.entropy_s0},
            {"beta", r.beta}}},
          {"errors",
           {{"lhs", r.lhs.stderr},
            {"rhs", r.rhs.stderr},
            {"slack", r.slack.stderr},
            {"energy_term", r.energy_term.stderr},
            {"h", r.h.stderr},
            {"c_bar", r.c_bar.stderr},
            {"d_bar", r.d_bar.stderr},
            {"info", r.info.stderr}}},
          {"omitted_mass", r.omitted_mass},
          {"appendix", {{"min_margin", am.worst}, {"worst_t", am.worst_t}, {"undersampled_steps", am.skipped}}},
          {"config_hash", hash}};
}

void run_bound(Context& ctx, const SystemModel& system, const ControlProtocol& protocol, const Ensemble& ensemble,
               const CanonicalSpec& canonical, Estimate h) {
  const Config& cfg = ctx.config;
  const auto partitions = make_partitions(system, required_partitions(cfg));
  BoundOptions opt;
  opt.depth = int(cfg.integer("depth"));
  opt.curve = curve_options(cfg);
  opt.volume_samples = std::size_t(cfg.integer("volume_samples"));
  opt.seed = ctx.seed;
  opt.threads = ctx.options.threads;

  CsvWriter report_csv(ctx.file("entropy_report.csv"),
                       {"partition_id", "t", "H_t", "dH_t", "flagged", "c_t", "c_err", "d_t", "d_err", "H_cond_t",
                        "ES_cg_t", "appendix_gap"});
  CsvWriter sweep_csv(ctx.file("bound_sweep.csv"),
                      {"partition_id", "T", "lhs", "lhs_err", "energy_term", "energy_err", "h", "h_err", "c_bar",
                       "c_bar_err", "d_bar", "d_bar_err", "info", "info_err", "rhs", "rhs_err", "slack",
                       "slack_err"});
  for (const auto& partition : partitions) {
    spdlog::info("bound: partition {} ({} cells), T = {}", partition.id(), partition.size(), opt.depth);
    const BoundReport r = bound_report(system, protocol, partition, ensemble, canonical, h, opt);
    write_json(ctx.file("bound_" + r.partition_id + ".json"), bound_json(r, ctx.hash));

    const BoundSeries& s = r.series;
    for (int t = 0; t <= r.horizon; ++t) {
      const auto i = std::size_t(t);
      report_csv << r.partition_id << t << s.curve.at(t) << (t > 0 ? s.curve.increment(t) : 0.0)
                 << (t > 0 && bool(s.curve.flagged[i - 1])) << s.c[i].value << s.c[i].stderr << s.d[i].value
                 << s.d[i].stderr << s.conditional_entropy[i] << s.coarse_entropy[i] << r.appendix_gap[i];
      report_csv.end();
    }
    for (int T = 1; T <= r.horizon; ++T) {
      const BoundReport b = assemble_bound(r, T);
      sweep_csv << b.partition_id << T << b.lhs.value << b.lhs.stderr << b.energy_term.value << b.energy_term.stderr
                << b.h.value << b.h.stderr << b.c_bar.value << b.c_bar.stderr << b.d_bar.value << b.d_bar.stderr
                << b.info.value << b.info.stderr << b.rhs.value << b.rhs.stderr << b.slack.value << b.slack.stderr;
      sweep_csv.end();
    }

    const std::string& pid = r.partition_id;
    if (cfg.boolean("expect.bound")) {
      const double floor = -3.0 * r.slack.stderr;
      ctx.check("bound_holds[" + pid + "]", r.slack.value >= floor, r.slack.value, floor,
                "slack " + format_real(r.slack.value) + " +- " + format_real(r.slack.stderr));
    }
    if (cfg.boolean("expect.appendix")) {
      const AppendixMargin am = appendix_margin(r);
      ctx.check("appendix[" + pid + "]", am.worst >= 0.0, am.worst, 0.0,
                "smallest gap + tolerance " + format_real(am.worst) + " at t = " + std::to_string(am.worst_t) +
                    ", " + std::to_string(am.skipped) + " undersampled steps not tested");
    }
    if (cfg.boolean("expect.second_law")) {
      double worst = INFINITY;
      for (std::size_t t = 0; t < s.lhs.size(); ++t) worst = std::min(worst, s.lhs[t] + 3.0 * s.lhs_err[t] + 1e-12);
      ctx.check("second_law[" + pid + "]", worst >= 0.0, worst, 0.0,
                "min over t of beta<W_d>_t + 3 sigma = " + format_real(worst));
    }
    if (auto target = ctx.opt_real("expect.slack_abs")) {
      const double a = std::abs(r.slack.value);
      ctx.check("slack_abs[" + pid + "]", a <= *target, a, *target, "|slack| = " + format_real(a));
    }
    if (auto target = ctx.opt_real("expect.info")) {
      const double dev = std::abs(r.info.value - *target);
      const double tol = cfg.real("expect.info_tol");
      ctx.check("info[" + pid + "]", dev <= tol, r.info.value, *target,
                "I = " + format_real(r.info.value) + ", |I - " + format_real(*target) + "| = " + format_real(dev));
    }
  }
}

// ---------------------------------------------------------------- work

void run_work(Context& ctx, const SystemModel& system, const ControlProtocol& protocol, const Ensemble& full) {
  const Config& cfg = ctx.config;
  const double beta = cfg.real("beta");
  const std::size_t n = ctx.count("work.samples", "samples");
  Ensemble ensemble;
  if (n <= full.size()) {
    ensemble.states.assign(full.states.begin(), full.states.begin() + std::ptrdiff_t(n));
  } else {
    ensemble = sample_canonical(system, {beta, protocol.initial(), n, ctx.seed}, ctx.options.threads);
  }
  spdlog::info("work: {} trajectories over {} steps", n, protocol.horizon());
  const WorkRecord record = work_ensemble(system, protocol, ensemble, beta, ctx.options.threads);
  json j = {{"mean_work", estimate_json(record.mean_work)},
            {"delta_f", record.delta_f},
            {"dissipated", estimate_json(record.dissipated)},
            {"initial_energy", estimate_json(record.initial_energy)},
            {"final_energy", estimate_json(record.final_energy)},
            {"beta", record.beta},
            {"horizon", record.horizon},
            {"samples", record.work.size()},
            {"config_hash", ctx.hash}};
  if (cfg.boolean("expect.second_law")) {
    const double floor = -3.0 * record.dissipated.stderr;
    ctx.check("second_law[work]", record.dissipated.value >= floor, record.dissipated.value, floor,
              "<W_d> = " + format_real(record.dissipated.value) + " +- " + format_real(record.dissipated.stderr));
  }
  if (beta > 0.0) {
    const JarzynskiResult jz = jarzynski_check(record, beta, ctx.seed);
    j["jarzynski"] = {{"mean_exp_work", jz.mean_exp_work},
                      {"target", jz.target},
                      {"deviation", jz.deviation},
                      {"stderr", jz.stderr},
                      {"pass", jz.pass}};
    if (cfg.boolean("expect.jarzynski"))
      ctx.check("jarzynski", jz.pass, jz.deviation, 3.0 * jz.stderr,
                "|<exp(-beta W)> - exp(-beta dF)| = " + format_real(jz.deviation) + ", sigma " +
                    format_real(jz.stderr));
  }
  write_json(ctx.file("work.json"), j);

  if (!cfg.has("relent.partitions")) return;
  if (beta <= 0.0) throw ConfigError("relative-entropy check needs beta > 0");
  const int tc = cfg.has("relent.comparison_time") ? int(cfg.integer("relent.comparison_time")) : protocol.horizon();
  if (tc > protocol.horizon()) throw ConfigError("relent.comparison_time exceeds the protocol horizon");
  Estimate direct = record.dissipated;
  if (tc != protocol.horizon()) {
    direct = work_ensemble(system, protocol.truncated(tc), ensemble, beta, ctx.options.threads).dissipated;
  }
  direct = {beta * direct.value, beta * direct.stderr};
  const Ensemble forward = evolve_ensemble(system, protocol, ensemble, tc, ctx.options.threads);
  const auto partitions = make_partitions(system, cfg.strings("relent.partitions"));
  CsvWriter csv(ctx.file("relent.csv"), {"partition_id", "cells", "comparison_time", "value", "stderr", "clipped",
                                         "direct", "direct_err"});
  std::optional<RelativeEntropyEstimate> previous;
  std::string previous_id;
  for (const auto& partition : partitions) {
    const CellHistogram fwd = cell_histogram(forward.states, partition);
    const CellHistogram bwd = backward_histogram(system, protocol, partition, beta, tc,
                                                 std::size_t(cfg.integer("relent.backward_samples")), ctx.seed,
                                                 ctx.options.threads);
    const RelativeEntropyEstimate est = relative_entropy_dissipation(fwd, bwd);
    csv << partition.id() << partition.size() << tc << est.value << est.stderr << est.clipped << direct.value
        << direct.stderr;
    csv.end();
    const double ceiling = direct.value + 3.0 * std::hypot(est.stderr, direct.stderr);
    ctx.check("relent_below_direct[" + partition.id() + "]", est.value <= ceiling, est.value, ceiling,
              "S = " + format_real(est.value) + " vs beta<W_d> = " + format_real(direct.value));
    if (previous) {
      const double floor = previous->value - 3.0 * std::hypot(est.stderr, previous->stderr) - 1e-12;
      ctx.check("relent_monotone[" + previous_id + "->" + partition.id() + "]", est.value >= floor, est.value, floor,
                "refined " + format_real(est.value) + " vs coarse " + format_real(previous->value));
    }
    previous = est;
    previous_id = partition.id();
  }
}

// ---------------------------------------------------------------- oracle

void run_oracle(Context& ctx) {
  const Config& cfg = ctx.config;
  const auto instances = std::size_t(cfg.integer("oracle.instances"));
  spdlog::info("oracle: {} random systems", instances);
  const OracleSweep sweep =
      oracle_property_sweep(instances, int(cfg.integer("oracle.max_cells")), int(cfg.integer("oracle.max_depth")),
                            std::size_t(cfg.integer("oracle.lemma_pairs")), ctx.seed, ctx.options.threads);

  const DiscreteSystem swap{{1, 0}, {0.5, 0.5}, {0.5, 0.5}};
  const auto terms = exact_terms(swap, 3);
  double swap_err = 0.0;
  for (const auto& t : terms) {
    if (t.t == 0) continue;
    swap_err = std::max({swap_err, std::abs(t.c_forward + 1.0), std::abs(t.d - std::log(2.0)),
                         std::abs(t.block_entropy - std::log(2.0))});
  }
  write_json(ctx.file("oracle.json"), {{"instances", sweep.instances},
                                       {"min_appendix_gap", sweep.min_appendix_gap},
                                       {"max_route_disagreement", sweep.max_route_disagreement},
                                       {"violations", sweep.violations},
                                       {"lemma_pairs", sweep.lemma_pairs},
                                       {"min_lemma_gap", sweep.min_lemma_gap},
                                       {"lemma_violations", sweep.lemma_violations},
                                       {"swap_max_error", swap_err},
                                       {"config_hash", ctx.hash}});
  ctx.check("oracle_appendix", sweep.violations == 0, sweep.min_appendix_gap, -1e-12,
            std::to_string(sweep.violations) + " violations, min gap " + format_real(sweep.min_appendix_gap));
  ctx.check("oracle_routes", sweep.max_route_disagreement <= 1e-12, sweep.max_route_disagreement, 1e-12,
            "forward and reversed c_t differ by " + format_real(sweep.max_route_disagreement));
  ctx.check("oracle_lemma", sweep.lemma_violations == 0, sweep.min_lemma_gap, 0.0,
            std::to_string(sweep.lemma_violations) + " violations in " + std::to_string(sweep.lemma_pairs) + " pairs");
  ctx.check("oracle_swap", swap_err <= 1e-12, swap_err, 1e-12, "N=2 swap max error " + format_real(swap_err));
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "run") return Command::kRun;
  if (name == "kse") return Command::kKse;
  if (name == "lyapunov") return Command::kLyapunov;
  if (name == "work") return Command::kWork;
  if (name == "bound") return Command::kBound;
  if (name == "oracle") return Command::kOracle;
  throw ConfigError("unknown command '" + name + "'");
}

std::string command_name(Command command) {
  switch (command) {
    case Command::kRun: return "run";
    case Command::kKse: return "kse";
    case Command::kLyapunov: return "lyapunov";
    case Command::kWork: return "work";
    case Command::kBound: return "bound";
    case Command::kOracle: return "oracle";
  }
  return {};
}

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

int exit_code(const RunResult& result) { return result.passed() ? 0 : 4; }

std::unique_ptr<SystemModel> make_system(const Config& config) {
  if (!config.has("system")) throw ConfigError("missing required config key 'system'");
  const std::string& name = config.string("system");
  if (name == "disk_rotation") return std::make_unique<DiskRotation>();
  if (name == "kicked_top")
    return std::make_unique<KickedTop>(config.real("alpha_top"), config.real("kappa"), config.boolean("renormalize"));
  return std::make_unique<DrivenOscillator>(config.real("domain_radius"));
}

ControlProtocol make_protocol(const Config& config) {
  const int horizon = int(config.has("protocol.horizon") ? config.integer("protocol.horizon") : config.integer("depth"));
  if (config.has("protocol.points")) {
    const PointList& pts = config.points("protocol.points");
    if (pts.empty()) throw ConfigError("protocol.points is empty");
    return ControlProtocol::from_points(pts, horizon);
  }
  return ControlProtocol::constant(config.real("lambda0"), horizon);
}

RunResult run_experiment(Config config, Command command, const RunOptions& options) {
  Context ctx;
  if (options.seed) config.set("seed", std::to_string(*options.seed));
  ctx.config = std::move(config);
  ctx.options = options;
  ctx.options.threads = std::max(1u, options.threads);
  ctx.seed = std::uint64_t(ctx.config.integer("seed"));
  ctx.hash = ctx.config.hash();
  fs::create_directories(options.out);
  {
    std::ofstream out(ctx.file("resolved_config.cfg"), std::ios::binary);
    out << ctx.config.canonical();
  }
  const Config& cfg = ctx.config;

  if (command == Command::kOracle) {
    run_oracle(ctx);
  } else {
    const auto system = make_system(cfg);
    const ControlProtocol protocol = make_protocol(cfg);
    const double beta = cfg.real("beta");
    const CanonicalSpec canonical{beta, protocol.initial(), std::size_t(cfg.integer("samples")), ctx.seed};
    const bool driven = !protocol.is_constant();
    std::optional<KseEstimate> kse;

    switch (command) {
      case Command::kKse:
        run_kse(ctx, *system, protocol);
        break;
      case Command::kLyapunov:
        run_lyapunov(ctx, *system, protocol);
        break;
      case Command::kWork: {
        if (beta == 0.0 && driven) throw ConfigError("work accounting with driving needs beta > 0");
        const Ensemble ensemble = sample_canonical(*system, canonical, ctx.options.threads);
        run_work(ctx, *system, protocol, ensemble);
        break;
      }
      case Command::kBound:
      case Command::kRun: {
        const Estimate h = resolve_h(ctx, *system, protocol, kse);
        if (command == Command::kRun && !kse && cfg.has("kse.partitions")) kse = run_kse(ctx, *system, protocol);
        spdlog::info("ensemble: {} samples at beta = {}", canonical.samples, beta);
        const Ensemble ensemble = sample_canonical(*system, canonical, ctx.options.threads);
        run_bound(ctx, *system, protocol, ensemble, canonical, h);
        if (command == Command::kRun && !(beta == 0.0 && driven)) run_work(ctx, *system, protocol, ensemble);
        break;
      }
      case Command::kOracle:
        break;
    }
  }

  RunResult& result = ctx.result;
  result.files.push_back("run_summary.json");
  std::sort(result.files.begin(), result.files.end());
  json checks = json::array();
  for (const auto& c : result.checks)
    checks.push_back(
        {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}});
  json files = json::array();
  for (const auto& f : result.files) files.push_back(f.string());
  write_json(options.out / "run_summary.json", {{"command", command_name(command)},
                                                {"config_hash", ctx.hash},
                                                {"seed", ctx.seed},
                                                {"passed", result.passed()},
                                                {"checks", checks},
                                                {"files", files}});
  return result;
}

}  // namespace ksd

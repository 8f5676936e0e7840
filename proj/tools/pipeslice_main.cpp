#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pipeslice/bench.hpp"
#include "pipeslice/parser.hpp"
#include "pipeslice/pdg.hpp"
#include "pipeslice/plan.hpp"
#include "pipeslice/runtime.hpp"
#include "pipeslice/scc.hpp"
#include "pipeslice/slicer.hpp"
#include "pipeslice/validate.hpp"
#include "pipeslice/workloads.hpp"

using namespace pipeslice;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct SourceOpts {
  std::string file;
  std::string workload;

  Program load() const {
    if (!workload.empty()) return workloads::program(workload);
    if (file.empty()) throw std::runtime_error("give a FILE or --workload");
    Program p = parse_program(read_file(file));
    validate_or_throw(p);
    return p;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("file", file, "mini-IR source file");
    cmd->add_option("--workload", workload,
                    "built-in workload name instead of a file");
  }
};

WorkloadInput make_input(const SourceOpts& src,
                         const std::vector<std::string>& params,
                         uint64_t seed) {
  std::map<std::string, int64_t> pmap;
  for (const auto& kv : params) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad --param '" + kv + "', expected NAME=INT");
    pmap[kv.substr(0, eq)] = std::stoll(kv.substr(eq + 1));
  }
  if (!src.workload.empty()) {
    auto full = workloads::default_params(src.workload);
    for (const auto& [k, v] : pmap) full[k] = v;
    return workloads::input(src.workload, full, seed);
  }
  // plain files: ints/reals from --param, lists from NAME_len params
  WorkloadInput in;
  for (const auto& [k, v] : pmap) {
    if (k.size() > 4 && k.substr(k.size() - 4) == "_len") {
      std::string name = k.substr(0, k.size() - 4);
      std::vector<double> data(static_cast<size_t>(v));
      uint64_t s = seed ^ 0x9e3779b97f4a7c15ULL;
      for (auto& d : data) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        d = static_cast<double>(s >> 11) / 9007199254740992.0 * 2.0;
      }
      in.lists[name] = std::move(data);
    } else {
      in.ints[k] = v;
    }
  }
  return in;
}

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

std::vector<int64_t> parse_range(const std::string& spec) {
  // "a,b,c" or "lo:hi:step"
  std::vector<int64_t> out;
  if (spec.find(':') != std::string::npos) {
    int64_t lo, hi, step = 1;
    char c;
    std::istringstream s(spec);
    s >> lo >> c >> hi;
    if (s >> c >> step) {
    }
    for (int64_t v = lo; v <= hi; v += step) out.push_back(v);
    return out;
  }
  std::istringstream s(spec);
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(std::stoll(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipeslice: loop pipelining with stage slicing for a small "
               "imperative IR"};
  app.require_subcommand(1);

  // ---- parse ----------------------------------------------------------
  auto* cmd_parse = app.add_subcommand("parse", "parse, validate and echo");
  SourceOpts parse_src;
  parse_src.attach(cmd_parse);
  bool parse_quiet = false;
  cmd_parse->add_flag("--validate-only", parse_quiet, "suppress the echo");

  // ---- analyze --------------------------------------------------------
  auto* cmd_analyze =
      app.add_subcommand("analyze", "loop discovery, PDG and SCC DAG");
  SourceOpts an_src;
  an_src.attach(cmd_analyze);
  std::string an_func, an_dot, an_dag_dot, an_json;
  bool an_loop_region = false;
  cmd_analyze->add_option("--func", an_func, "function (default: entry)");
  cmd_analyze->add_flag("--loop", an_loop_region,
                        "analyze the candidate loop region");
  cmd_analyze->add_option("--dot", an_dot, "write PDG DOT here");
  cmd_analyze->add_option("--dag-dot", an_dag_dot, "write SCC-DAG DOT here");
  cmd_analyze->add_option("--json", an_json, "write PDG JSON here");

  // ---- slice ----------------------------------------------------------
  auto* cmd_slice = app.add_subcommand("slice", "backward-slice a function");
  SourceOpts sl_src;
  sl_src.attach(cmd_slice);
  std::string sl_func, sl_json;
  cmd_slice->add_option("--func", sl_func, "function to slice")->required();
  cmd_slice->add_option("--json", sl_json, "write criterion/instr map here");

  // ---- plan -----------------------------------------------------------
  auto* cmd_plan = app.add_subcommand("plan", "build the pipeline plan");
  SourceOpts pl_src;
  pl_src.attach(cmd_plan);
  int pl_workers = 8, pl_cap = 1024;
  std::string pl_slice = "auto", pl_json;
  cmd_plan->add_option("--max-workers", pl_workers, "worker budget");
  cmd_plan->add_option("--queue-capacity", pl_cap, "channel capacity");
  cmd_plan->add_option("--slice", pl_slice, "on|off|auto");
  cmd_plan->add_option("--json", pl_json, "write plan JSON here");

  // ---- run ------------------------------------------------------------
  auto* cmd_run = app.add_subcommand("run", "execute a program or workload");
  SourceOpts run_src;
  run_src.attach(cmd_run);
  std::string run_mode = "sequential";
  int run_workers = 8, run_cap = 1024, run_reps = 1;
  uint64_t run_seed = 1;
  double run_tol = 1e-9;
  std::vector<std::string> run_params;
  bool run_no_verify = false;
  cmd_run->add_option("--mode", run_mode, "sequential|dswp|dswp-slice");
  cmd_run->add_option("--workers", run_workers, "max workers");
  cmd_run->add_option("--queue-capacity", run_cap, "channel capacity");
  cmd_run->add_option("--reps", run_reps, "repetitions");
  cmd_run->add_option("--seed", run_seed, "input seed");
  cmd_run->add_option("--tolerance", run_tol, "equivalence tolerance");
  cmd_run->add_option("--param", run_params, "workload parameter NAME=INT");
  cmd_run->add_flag("--no-verify", run_no_verify,
                    "skip the sequential cross-check");

  // ---- bench ----------------------------------------------------------
  auto* cmd_bench = app.add_subcommand("bench", "benchmark suite / sweep");
  std::vector<std::string> be_workloads;
  std::string be_csv, be_json, be_sweep_n, be_sweep_m;
  int be_reps = 5, be_cap = 1024, be_workers = 8;
  uint64_t be_seed = 1;
  bool be_full = false, be_sweep = false;
  double be_comm_scale = 1.0, be_comm_override = -1.0;
  cmd_bench->add_option("--workloads", be_workloads,
                        "subset of workloads (default: all)");
  cmd_bench->add_option("--reps", be_reps, "repetitions per row");
  cmd_bench->add_option("--seed", be_seed, "input seed");
  cmd_bench->add_option("--queue-capacity", be_cap, "channel capacity");
  cmd_bench->add_option("--max-workers", be_workers, "worker budget");
  cmd_bench->add_flag("--full-scale", be_full, "larger parameter sets");
  cmd_bench->add_flag("--sweep", be_sweep, "run the overhead N/M sweep");
  cmd_bench->add_option("--sweep-n", be_sweep_n, "N values (a,b,c or lo:hi:step)");
  cmd_bench->add_option("--sweep-m", be_sweep_m, "M values (a,b,c or lo:hi:step)");
  cmd_bench->add_option("--comm-cost-scale", be_comm_scale,
                        "multiply the calibrated channel cost");
  cmd_bench->add_option("--comm-cost", be_comm_override,
                        "fixed channel cost in cycles/element");
  cmd_bench->add_option("--csv", be_csv, "write CSV here");
  cmd_bench->add_option("--json", be_json, "write JSON report here");

  // ---- calibrate --------------------------------------------------------
  auto* cmd_cal = app.add_subcommand("calibrate", "measure channel cost");
  uint64_t cal_elems = 1'000'000;
  int cal_cap = 1024, cal_reps = 3;
  cmd_cal->add_option("--elements", cal_elems, "elements to stream");
  cmd_cal->add_option("--capacity", cal_cap, "channel capacity");
  cmd_cal->add_option("--repeats", cal_reps, "measurement repeats");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_parse->parsed()) {
      Program p = parse_src.load();
      if (!parse_quiet) std::cout << pretty_print(p);
      std::cerr << "ok: " << p.functions.size() << " function(s)\n";
      return 0;
    }

    if (cmd_analyze->parsed()) {
      Program p = an_src.load();
      const Function* f =
          p.find_function(an_func.empty() ? p.entry : an_func);
      if (!f) throw std::runtime_error("no such function");
      Pdg g;
      if (an_loop_region) {
        LatencyModel model;
        LoopSelection sel = select_candidate_loop(p, model);
        f = p.find_function(sel.function);
        g = build_pdg(p, *f, sel.loop);
        std::cout << "candidate loop: '" << sel.loop.header << "' in "
                  << sel.function << "\n";
        for (const auto& sc : sel.scores)
          std::cout << "  loop " << sc.function << "/" << sc.header
                    << " cost=" << sc.cost
                    << (sc.contains_call ? " (call)" : "") << "\n";
      } else {
        g = build_pdg(p, *f);
      }
      std::cout << "pdg: " << g.nodes.size() << " nodes, " << g.edges.size()
                << " edges\n";
      auto sccs = compute_sccs(g);
      LatencyModel model;
      DagScc dag = build_dagscc(g, sccs, [&](InstrId id) {
        return estimate_instr_cost(p, *f, *f->find_instr(id), model);
      });
      std::cout << "dag-scc: " << dag.components.size() << " components\n";
      for (const auto& li : find_loops(*f))
        std::cout << "  loop '" << li.header << "' depth=" << li.depth
                  << (li.contains_call ? " call" : "")
                  << (li.induction ? " induction=" + *li.induction : "")
                  << "\n";
      if (!an_dot.empty()) write_or_print(export_dot(g, *f), an_dot);
      if (!an_dag_dot.empty()) write_or_print(export_dot(dag), an_dag_dot);
      if (!an_json.empty()) write_or_print(export_json(g), an_json);
      return 0;
    }

    if (cmd_slice->parsed()) {
      Program p = sl_src.load();
      const Function* f = p.find_function(sl_func);
      if (!f) throw std::runtime_error("no such function '" + sl_func + "'");
      auto slices = slice_function(p, *f);
      nlohmann::json j = nlohmann::json::array();
      for (size_t i = 0; i < slices.size(); ++i) {
        const Slice& s = slices[i];
        Function m = materialize(*f, s, f->name + "_slice_" +
                                            s.criterion.location);
        std::cout << "# slice " << i + 1 << " on '" << s.criterion.location
                  << "' (" << s.instrs.size() << " instrs + "
                  << s.control_skeleton.size() << " skeleton)\n";
        std::cout << pretty_print(m) << "\n";
        j.push_back({{"criterion", s.criterion.location},
                     {"instrs", std::vector<InstrId>(s.instrs.begin(),
                                                     s.instrs.end())},
                     {"skeleton", std::vector<InstrId>(
                                      s.control_skeleton.begin(),
                                      s.control_skeleton.end())}});
      }
      if (!sl_json.empty()) write_or_print(j.dump(2), sl_json);
      return 0;
    }

    if (cmd_plan->parsed()) {
      Program p = pl_src.load();
      PlanConfig pc;
      pc.max_workers = pl_workers;
      pc.queue_capacity = pl_cap;
      pc.slice = pl_slice == "on"    ? PlanConfig::SliceMode::On
                 : pl_slice == "off" ? PlanConfig::SliceMode::Off
                                     : PlanConfig::SliceMode::Auto;
      PipelinePlan plan = plan_dswp_slice(p, pc);
      std::cout << "plan: " << (plan.degenerate ? "sequential"
                                : plan.sliced   ? "dswp-slice"
                                                : "dswp")
                << ", " << plan.worker_count << " worker(s), "
                << plan.channels.size() << " channel(s)\n";
      for (const auto& line : plan.decision_log)
        std::cout << "  - " << line << "\n";
      if (!pl_json.empty()) write_or_print(export_json(plan), pl_json);
      return 0;
    }

    if (cmd_run->parsed()) {
      Program p = run_src.load();
      WorkloadInput in = make_input(run_src, run_params, run_seed);
      RunConfig rc;
      rc.mode = mode_from_string(run_mode);
      rc.workers = run_workers;
      rc.queue_capacity = run_cap;
      rc.repetitions = run_reps;
      rc.seed = run_seed;
      rc.tolerance = run_tol;

      if (rc.mode == Mode::Sequential) {
        RunReport rep = execute_sequential(p, in, rc);
        std::cout << export_json(rep) << "\n";
        return 0;
      }
      PlanConfig pc;
      pc.max_workers = run_workers;
      pc.queue_capacity = run_cap;
      pc.slice = rc.mode == Mode::DswpSlice ? PlanConfig::SliceMode::On
                                            : PlanConfig::SliceMode::Off;
      PipelinePlan plan = plan_dswp_slice(p, pc);
      RunReport rep = execute_plan(plan, in, rc);
      std::cout << export_json(rep) << "\n";
      if (!run_no_verify) {
        RunReport seq = execute_sequential(p, in, rc);
        std::string diff;
        if (!verify_equivalence(seq, rep, run_tol, &diff)) {
          std::cerr << "EQUIVALENCE FAILED\n" << diff;
          return 1;
        }
        std::cerr << "equivalence vs sequential: ok\n";
      }
      return 0;
    }

    if (cmd_bench->parsed()) {
      BenchConfig bc;
      bc.workloads = be_workloads;
      bc.repetitions = be_reps;
      bc.seed = be_seed;
      bc.queue_capacity = be_cap;
      bc.max_workers = be_workers;
      bc.full_scale = be_full;
      bc.comm_cost_scale = be_comm_scale;
      if (be_comm_override >= 0) bc.comm_cost_override = be_comm_override;

      if (be_sweep) {
        auto ns = be_sweep_n.empty() ? std::vector<int64_t>{2, 8, 32}
                                     : parse_range(be_sweep_n);
        auto ms = be_sweep_m.empty() ? std::vector<int64_t>{2, 8, 32, 128, 512}
                                     : parse_range(be_sweep_m);
        SweepResult sw = sweep_overhead(ns, ms, bc);
        std::cout << emit_csv(sw.report);
        for (size_t i = 0; i < sw.n_values.size(); ++i) {
          std::cout << "# N=" << sw.n_values[i] << " crossover=";
          if (sw.crossover_index[i] < 0)
            std::cout << "none";
          else
            std::cout << "M=" << sw.m_values[static_cast<size_t>(
                                     sw.crossover_index[i])];
          std::cout << (sw.monotone[i] ? " monotone" : " NOT monotone")
                    << "\n";
        }
        if (!be_csv.empty()) write_csv(sw.report, be_csv);
        if (!be_json.empty()) write_or_print(export_json(sw.report), be_json);
        return sw.report.all_verified() ? 0 : 1;
      }

      BenchReport rep = run_suite(bc);
      std::cout << emit_csv(rep);
      std::cout << "# comm-cost " << rep.comm_cost << " cycles/element"
                << (rep.calibrated ? " (calibrated)" : "") << "\n";
      for (const auto& d : rep.decisions)
        std::cout << "# " << d.workload << ": chosen=" << d.chosen
                  << " predicted=" << d.predicted_speedup << "\n";
      if (!be_csv.empty()) write_csv(rep, be_csv);
      if (!be_json.empty()) write_or_print(export_json(rep), be_json);
      return rep.all_verified() ? 0 : 1;
    }

    if (cmd_cal->parsed()) {
      CalibrateConfig cc;
      cc.elements = cal_elems;
      cc.capacity = cal_cap;
      cc.repeats = cal_reps;
      CalibrationResult res = calibrate(cc);
      std::cout << "elements: " << res.elements << "\n"
                << "median seconds: " << res.seconds << "\n"
                << "cycles/element: " << res.cycles_per_element << "\n";
      if (res.fallback) std::cout << "warning: " << res.note << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

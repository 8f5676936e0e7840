#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pipeslice/bench.hpp"
#include "pipeslice/parser.hpp"
#include "pipeslice/pdg.hpp"
#include "pipeslice/plan.hpp"
#include "pipeslice/runtime.hpp"
#include "pipeslice/slicer.hpp"
#include "pipeslice/validate.hpp"
#include "pipeslice/workloads.hpp"

namespace py = pybind11;
using namespace pipeslice;

namespace {

Program load(const std::string& text_or_name, bool is_workload) {
  if (is_workload) return workloads::program(text_or_name);
  Program p = parse_program(text_or_name);
  validate_or_throw(p);
  return p;
}

WorkloadInput input_from_dict(const std::string& workload,
                              const py::dict& params, uint64_t seed) {
  std::map<std::string, int64_t> pmap;
  for (const auto& item : params)
    pmap[py::cast<std::string>(item.first)] = py::cast<int64_t>(item.second);
  auto full = workloads::default_params(workload);
  for (const auto& [k, v] : pmap) full[k] = v;
  return workloads::input(workload, full, seed);
}

}  // namespace

PYBIND11_MODULE(_pipeslice, m) {
  m.doc() = "loop pipelining with stage slicing for a small imperative IR";

  m.def("parse_roundtrip", [](const std::string& text) {
    Program p = parse_program(text);
    return pretty_print(p);
  });

  m.def("validate_text", [](const std::string& text) {
    Program p = parse_program(text);
    std::vector<std::string> out;
    for (const auto& d : validate(p)) out.push_back(d.str());
    return out;
  });

  m.def("workloads", [] { return workloads::names(); });
  m.def("workload_source",
        [](const std::string& name) { return workloads::source(name); });

  m.def("find_loops_of", [](const std::string& name, const std::string& fn) {
    Program p = workloads::program(name);
    const Function* f = p.find_function(fn);
    if (!f) throw std::runtime_error("no such function");
    py::list out;
    for (const auto& l : find_loops(*f)) {
      py::dict d;
      d["header"] = l.header;
      d["depth"] = l.depth;
      d["contains_call"] = l.contains_call;
      if (l.induction) d["induction"] = *l.induction;
      out.append(d);
    }
    return out;
  });

  m.def("pdg_json", [](const std::string& name, const std::string& fn) {
    Program p = workloads::program(name);
    const Function* f = p.find_function(fn);
    if (!f) throw std::runtime_error("no such function");
    return export_json(build_pdg(p, *f));
  });

  m.def("slice_names", [](const std::string& name, const std::string& fn) {
    Program p = workloads::program(name);
    const Function* f = p.find_function(fn);
    if (!f) throw std::runtime_error("no such function");
    std::vector<std::string> out;
    for (const auto& s : slice_function(p, *f))
      out.push_back(s.criterion.location);
    return out;
  });

  m.def("slice_text", [](const std::string& name, const std::string& fn) {
    Program p = workloads::program(name);
    const Function* f = p.find_function(fn);
    if (!f) throw std::runtime_error("no such function");
    std::string out;
    for (const auto& s : slice_function(p, *f))
      out += pretty_print(
          materialize(*f, s, f->name + "_slice_" + s.criterion.location));
    return out;
  });

  m.def("plan_json", [](const std::string& name, const std::string& slice) {
    Program p = workloads::program(name);
    PlanConfig pc;
    pc.slice = slice == "on"    ? PlanConfig::SliceMode::On
               : slice == "off" ? PlanConfig::SliceMode::Off
                                : PlanConfig::SliceMode::Auto;
    return export_json(plan_dswp_slice(p, pc));
  });

  m.def(
      "run",
      [](const std::string& workload, const std::string& mode,
         const py::dict& params, uint64_t seed, int reps) {
        Program p = workloads::program(workload);
        WorkloadInput in = input_from_dict(workload, params, seed);
        RunConfig rc;
        rc.repetitions = reps;
        rc.mode = mode_from_string(mode);
        if (rc.mode == Mode::Sequential)
          return export_json(execute_sequential(p, in, rc));
        PlanConfig pc;
        pc.slice = rc.mode == Mode::DswpSlice ? PlanConfig::SliceMode::On
                                              : PlanConfig::SliceMode::Off;
        PipelinePlan plan = plan_dswp_slice(p, pc);
        RunReport rep = execute_plan(plan, in, rc);
        RunReport seq = execute_sequential(p, in, rc);
        std::string diff;
        if (!verify_equivalence(seq, rep, rc.tolerance, &diff))
          throw std::runtime_error("equivalence failed: " + diff);
        return export_json(rep);
      },
      py::arg("workload"), py::arg("mode") = "sequential",
      py::arg("params") = py::dict(), py::arg("seed") = 1,
      py::arg("reps") = 1);

  m.def("calibrate", [](uint64_t elements) {
    CalibrateConfig cc;
    cc.elements = elements;
    CalibrationResult res = calibrate(cc);
    py::dict d;
    d["cycles_per_element"] = res.cycles_per_element;
    d["seconds"] = res.seconds;
    d["fallback"] = res.fallback;
    return d;
  });

  m.def(
      "bench_csv",
      [](const std::vector<std::string>& names, int reps) {
        BenchConfig bc;
        bc.workloads = names;
        bc.repetitions = reps;
        return emit_csv(run_suite(bc));
      },
      py::arg("names") = std::vector<std::string>{}, py::arg("reps") = 1);
}

#include "testutil.hpp"

#include <sstream>

namespace testutil {

namespace {

struct FnGen {
  Rng& rng;
  const GenOpts& opts;
  bool has_out_param = false;
  bool returns = false;
  bool helper_available = false;

  std::vector<std::string> int_vars{"i0", "i1"};
  std::vector<std::string> real_vars{"r0", "r1", "r2"};
  int next_loop = 0, next_cond = 0, next_block = 0;
  std::vector<std::string> extra_locals;  // "name kind"

  std::ostringstream body;
  std::string cur_label = "entry";
  bool block_open = false;

  void open(const std::string& label) {
    body << label << ":\n";
    block_open = true;
  }
  void instr(const std::string& text) { body << "  " << text << "\n"; }
  void close_jump(const std::string& target) {
    body << "  jump " << target << "\n";
    block_open = false;
  }

  std::string fresh_block() { return "b" + std::to_string(next_block++); }

  const std::string& any_int(Rng& r) {
    return int_vars[static_cast<size_t>(r.range(0, static_cast<int>(int_vars.size()) - 1))];
  }
  const std::string& any_real(Rng& r) {
    return real_vars[static_cast<size_t>(r.range(0, static_cast<int>(real_vars.size()) - 1))];
  }

  void gen_stmt() {
    switch (rng.range(0, has_out_param ? 7 : 6)) {
      case 0:
        instr(any_real(rng) + " = " + std::to_string(rng.range(-3, 9)) + ".5");
        break;
      case 1:
        instr(any_real(rng) + " = " + any_real(rng) + " + " + any_real(rng));
        break;
      case 2:
        instr(any_real(rng) + " = " + any_real(rng) + " * " + any_real(rng));
        break;
      case 3:
        instr(any_int(rng) + " = " + any_int(rng) + " + " +
              std::to_string(rng.range(1, 3)));
        break;
      case 4:
        instr("g0[" + std::to_string(rng.range(0, 7)) + "] = " + any_real(rng));
        break;
      case 5:
        instr(any_real(rng) + " = g0[" + std::to_string(rng.range(0, 7)) + "]");
        break;
      case 6:
        if (opts.with_calls && helper_available)
          instr(any_real(rng) + " = call hlp(" + any_real(rng) + ")");
        else
          instr(any_real(rng) + " = " + any_real(rng) + " - " + any_real(rng));
        break;
      case 7:
        instr("outp[" + std::to_string(rng.range(0, 7)) + "] = " +
              any_real(rng));
        break;
    }
  }

  void gen_region(int depth) {
    int stmts = rng.range(1, opts.max_stmts);
    for (int i = 0; i < stmts; ++i) gen_stmt();
    if (depth < opts.max_depth && rng.chance(55)) {
      if (rng.chance(60))
        gen_loop(depth);
      else
        gen_if(depth);
      int tail = rng.range(0, 2);
      for (int i = 0; i < tail; ++i) gen_stmt();
    }
  }

  void gen_loop(int depth) {
    std::string jv = "jl" + std::to_string(next_loop);
    std::string cv = "cl" + std::to_string(next_loop);
    ++next_loop;
    extra_locals.push_back(jv + ": int");
    extra_locals.push_back(cv + ": int");
    std::string header = fresh_block(), bodyb = fresh_block(),
                exitb = fresh_block();
    int bound = rng.range(0, 4);
    instr(jv + " = 0");
    close_jump(header);
    open(header);
    instr(cv + " = " + jv + " < " + std::to_string(bound));
    body << "  br " << cv << " " << bodyb << " " << exitb << "\n";
    block_open = false;
    open(bodyb);
    gen_region(depth + 1);
    instr(jv + " = " + jv + " + 1");
    close_jump(header);
    open(exitb);
  }

  void gen_if(int depth) {
    std::string cv = "ci" + std::to_string(next_cond++);
    extra_locals.push_back(cv + ": int");
    std::string thenb = fresh_block(), elseb = fresh_block(),
                merge = fresh_block();
    instr(cv + " = " + any_real(rng) + " < " + any_real(rng));
    body << "  br " << cv << " " << thenb << " " << elseb << "\n";
    block_open = false;
    open(thenb);
    gen_region(depth + 1);
    close_jump(merge);
    open(elseb);
    if (rng.chance(70)) gen_region(depth + 1);
    close_jump(merge);
    open(merge);
  }

  std::string finish(const std::string& name) {
    std::ostringstream fn;
    fn << "func " << name << "(";
    std::vector<std::string> params;
    params.push_back("x: real");
    params.push_back("k: int");
    if (has_out_param) params.push_back("outp: real[]");
    for (size_t i = 0; i < params.size(); ++i)
      fn << (i ? ", " : "") << params[i];
    fn << ")";
    if (returns) fn << " -> real";
    fn << " {\n";
    for (const auto& v : int_vars) fn << "  local " << v << ": int\n";
    for (const auto& v : real_vars) fn << "  local " << v << ": real\n";
    for (const auto& l : extra_locals) fn << "  local " << l << "\n";
    fn << body.str();
    if (returns)
      fn << "  ret r0\n";
    else
      fn << "  ret\n";
    fn << "}\n";
    return fn.str();
  }
};

}  // namespace

Program gen_program(uint64_t seed, const GenOpts& opts) {
  Rng rng(seed);
  std::ostringstream src;
  src << "global g0: real[8]\n";
  src << "global g1: real[8]\n\n";
  src << "entry main\n\n";

  bool with_helper = opts.with_calls;
  if (with_helper) {
    src << "func hlp(v: real) -> real pure {\n"
        << "  local t: real\n"
        << "entry:\n"
        << "  t = v * 0.5\n"
        << "  ret t\n"
        << "}\n\n";
  }

  int fns = rng.range(1, 2);
  for (int i = 0; i < fns; ++i) {
    FnGen g{rng, opts};
    g.helper_available = with_helper;
    if (opts.with_outputs) {
      g.has_out_param = i > 0 && rng.chance(50);  // entry args stay scalar
      g.returns = rng.chance(50);
    }
    g.open("entry");
    g.gen_region(0);
    src << g.finish(i == 0 ? "main" : ("f" + std::to_string(i))) << "\n";
  }
  std::string text = src.str();
  Program p = parse_program(text);
  return p;
}

const Instr* find_store(const Function& f, const std::string& array,
                        int occurrence) {
  int seen = 0;
  for (const auto& b : f.body)
    for (const auto& i : b.instrs)
      if (i.op == Opcode::ArrayStore && i.array == array)
        if (seen++ == occurrence) return &i;
  return nullptr;
}

const Instr* find_call(const Function& f, const std::string& callee,
                       int occurrence) {
  int seen = 0;
  for (const auto& b : f.body)
    for (const auto& i : b.instrs)
      if (i.op == Opcode::Call && i.callee == callee)
        if (seen++ == occurrence) return &i;
  return nullptr;
}

std::vector<InstrId> all_ids(const Function& f) {
  std::vector<InstrId> out;
  for (const auto& b : f.body) {
    for (const auto& i : b.instrs) out.push_back(i.id);
    out.push_back(b.terminator.id);
  }
  return out;
}

}  // namespace testutil

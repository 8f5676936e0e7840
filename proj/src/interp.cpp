#include "pipeslice/interp.hpp"

#include <cmath>

#include "pipeslice/validate.hpp"

namespace pipeslice {

namespace {

constexpr int kMaxCallDepth = 128;

[[noreturn]] void fail(InterpError::Kind k, const std::string& msg) {
  throw InterpError(k, msg);
}

int64_t checked_index(const Value& v) {
  if (v.k != Kind::Int) fail(InterpError::Kind::BadInput, "non-int array index");
  return v.i;
}

Value eval_bin(BinOp op, const Value& a, const Value& b) {
  if (a.k == Kind::Node || b.k == Kind::Node) {
    if (op == BinOp::Eq) return Value::of_int(a.node == b.node);
    if (op == BinOp::Ne) return Value::of_int(a.node != b.node);
    fail(InterpError::Kind::BadInput, "node value in arithmetic");
  }
  bool real = a.k == Kind::Real || b.k == Kind::Real;
  switch (op) {
    case BinOp::Add:
      return real ? Value::of_real(a.as_real() + b.as_real())
                  : Value::of_int(a.i + b.i);
    case BinOp::Sub:
      return real ? Value::of_real(a.as_real() - b.as_real())
                  : Value::of_int(a.i - b.i);
    case BinOp::Mul:
      return real ? Value::of_real(a.as_real() * b.as_real())
                  : Value::of_int(a.i * b.i);
    case BinOp::Div:
      if (real) {
        double d = b.as_real();
        if (d == 0.0) fail(InterpError::Kind::DivZero, "division by zero");
        return Value::of_real(a.as_real() / d);
      }
      if (b.i == 0) fail(InterpError::Kind::DivZero, "division by zero");
      return Value::of_int(a.i / b.i);
    case BinOp::Mod:
      if (real) fail(InterpError::Kind::BadInput, "'%' on real");
      if (b.i == 0) fail(InterpError::Kind::DivZero, "division by zero");
      return Value::of_int(a.i % b.i);
    case BinOp::Lt:
      return Value::of_int(real ? a.as_real() < b.as_real() : a.i < b.i);
    case BinOp::Le:
      return Value::of_int(real ? a.as_real() <= b.as_real() : a.i <= b.i);
    case BinOp::Gt:
      return Value::of_int(real ? a.as_real() > b.as_real() : a.i > b.i);
    case BinOp::Ge:
      return Value::of_int(real ? a.as_real() >= b.as_real() : a.i >= b.i);
    case BinOp::Eq:
      return Value::of_int(real ? a.as_real() == b.as_real() : a.i == b.i);
    case BinOp::Ne:
      return Value::of_int(real ? a.as_real() != b.as_real() : a.i != b.i);
  }
  fail(InterpError::Kind::BadInput, "bad binop");
}

}  // namespace

Engine::Engine(Program p) : prog_(std::move(p)) {
  for (size_t i = 0; i < prog_.globals.size(); ++i)
    global_of_[prog_.globals[i].name] = static_cast<int>(i);
  for (size_t i = 0; i < prog_.functions.size(); ++i)
    func_of_[prog_.functions[i].name] = static_cast<int>(i);
  funcs_.resize(prog_.functions.size());
  for (size_t i = 0; i < prog_.functions.size(); ++i)
    resolve_function(prog_.functions[i], funcs_[i]);
  auto it = func_of_.find(prog_.entry);
  entry_ = it == func_of_.end() ? -1 : it->second;
}

int Engine::function_index(const std::string& name) const {
  auto it = func_of_.find(name);
  return it == func_of_.end() ? -1 : it->second;
}

int Engine::slot_index(int func, const std::string& var) const {
  const auto& rf = funcs_[static_cast<size_t>(func)];
  auto it = rf.slot_of.find(var);
  return it == rf.slot_of.end() ? -1 : it->second;
}

int Engine::slot_count(int func) const {
  return funcs_[static_cast<size_t>(func)].n_slots;
}

int Engine::global_index(const std::string& name) const {
  auto it = global_of_.find(name);
  return it == global_of_.end() ? -1 : it->second;
}

Engine::RArg Engine::resolve_arg(const RFunction& rf, const Operand& o) const {
  RArg a;
  switch (o.k) {
    case Operand::K::None:
      break;
    case Operand::K::IntLit:
      a.lit = Value::of_int(o.ival);
      break;
    case Operand::K::RealLit:
      a.lit = Value::of_real(o.rval);
      break;
    case Operand::K::NullLit:
      a.lit = Value::of_node(-1);
      break;
    case Operand::K::Var: {
      auto it = rf.slot_of.find(o.var);
      if (it != rf.slot_of.end()) {
        a.slot = it->second;
      } else {
        auto g = global_of_.find(o.var);
        if (g == global_of_.end())
          throw std::runtime_error("unresolved variable '" + o.var + "'");
        a.lit = Value::of_array(g->second);  // global array as value
      }
      break;
    }
  }
  return a;
}

void Engine::resolve_function(const Function& f, RFunction& rf) {
  rf.name = f.name;
  rf.instr_count = f.instr_count;
  rf.n_params = static_cast<int>(f.params.size());
  for (const auto& prm : f.params) {
    rf.slot_of[prm.name] = rf.n_slots++;
    rf.slot_kinds.push_back(prm.kind);
    rf.param_kinds.push_back(prm.kind);
  }
  for (const auto& l : f.locals) {
    rf.slot_of[l.name] = rf.n_slots++;
    rf.slot_kinds.push_back(l.kind);
  }
  rf.ret = f.return_kind;

  // first pass: linear layout, record block starts
  std::map<std::string, int> block_start;
  rf.code_of_orig.assign(static_cast<size_t>(f.instr_count), -1);
  for (const auto& b : f.body) {
    block_start[b.label] = static_cast<int>(rf.code.size());
    auto emit = [&](const Instr& i) {
      RInstr R;
      R.op = i.op;
      R.bin = i.bin;
      R.orig = i.id;
      if (!i.dst.empty()) {
        auto it = rf.slot_of.find(i.dst);
        R.dst = it == rf.slot_of.end() ? -1 : it->second;
        if (R.dst < 0)
          throw std::runtime_error("unresolved variable '" + i.dst + "'");
      }
      switch (i.op) {
        case Opcode::ConstAssign:
        case Opcode::Copy:
        case Opcode::Neg:
          R.a = resolve_arg(rf, i.a);
          break;
        case Opcode::Bin:
          R.a = resolve_arg(rf, i.a);
          R.b = resolve_arg(rf, i.b);
          break;
        case Opcode::ArrayLoad:
        case Opcode::ArrayStore: {
          auto slot = rf.slot_of.find(i.array);
          if (slot != rf.slot_of.end()) {
            R.arr_slot = slot->second;
          } else {
            auto g = global_of_.find(i.array);
            if (g == global_of_.end())
              throw std::runtime_error("unresolved array '" + i.array + "'");
            R.arr_global = g->second;
          }
          R.a = resolve_arg(rf, i.a);
          if (i.op == Opcode::ArrayStore) R.b = resolve_arg(rf, i.b);
          break;
        }
        case Opcode::LoadData:
        case Opcode::LoadNext: {
          auto it = rf.slot_of.find(i.base);
          if (it == rf.slot_of.end())
            throw std::runtime_error("unresolved variable '" + i.base + "'");
          R.a.slot = it->second;
          break;
        }
        case Opcode::Call: {
          if (is_intrinsic(i.callee)) {
            R.intrinsic = i.callee == "cos" ? 0 : i.callee == "sin" ? 1 : 2;
          } else {
            auto it = func_of_.find(i.callee);
            if (it == func_of_.end())
              throw std::runtime_error("unresolved call '" + i.callee + "'");
            R.callee_fn = it->second;
          }
          for (const auto& arg : i.args) R.args.push_back(resolve_arg(rf, arg));
          break;
        }
        case Opcode::Jump:
        case Opcode::CondBr:
          break;  // targets patched below
        case Opcode::Ret:
          R.is_ret = true;
          R.ret_has_value = i.a.present();
          if (R.ret_has_value) R.a = resolve_arg(rf, i.a);
          break;
      }
      rf.code_of_orig[static_cast<size_t>(i.id)] = static_cast<int>(rf.code.size());
      rf.code.push_back(std::move(R));
      if (i.op == Opcode::CondBr) rf.code.back().a = resolve_arg(rf, i.a);
    };
    for (const auto& i : b.instrs) emit(i);
    emit(b.terminator);
  }
  // patch jump targets
  int pc = 0;
  for (const auto& b : f.body) {
    pc += static_cast<int>(b.instrs.size());
    RInstr& t = rf.code[static_cast<size_t>(pc)];
    if (b.terminator.op == Opcode::Jump) {
      t.t_target = block_start.at(b.terminator.label1);
    } else if (b.terminator.op == Opcode::CondBr) {
      t.t_target = block_start.at(b.terminator.label1);
      t.f_target = block_start.at(b.terminator.label2);
    }
    ++pc;
  }
}

Memory Engine::make_memory(const WorkloadInput& in) const {
  Memory mem;
  for (const auto& g : prog_.globals) {
    ArrayStorage st;
    st.elem = g.elem;
    if (g.elem == Kind::Int)
      st.ints.assign(static_cast<size_t>(g.length), 0);
    else
      st.reals.assign(static_cast<size_t>(g.length), 0.0);
    auto ri = in.global_reals.find(g.name);
    if (ri != in.global_reals.end() && g.elem == Kind::Real)
      for (size_t i = 0; i < ri->second.size() && i < st.reals.size(); ++i)
        st.reals[i] = ri->second[i];
    auto ii = in.global_ints.find(g.name);
    if (ii != in.global_ints.end() && g.elem == Kind::Int)
      for (size_t i = 0; i < ii->second.size() && i < st.ints.size(); ++i)
        st.ints[i] = ii->second[i];
    mem.arrays.push_back(std::move(st));
  }
  // node lists: chain each input list; heads are resolved in
  // bind_entry_args by name
  return mem;
}

std::vector<Value> Engine::init_slots(int func) const {
  const auto& rf = funcs_[static_cast<size_t>(func)];
  std::vector<Value> slots(static_cast<size_t>(rf.n_slots));
  for (int i = 0; i < rf.n_slots; ++i) {
    switch (rf.slot_kinds[static_cast<size_t>(i)]) {
      case Kind::Int: slots[static_cast<size_t>(i)] = Value::of_int(0); break;
      case Kind::Real: slots[static_cast<size_t>(i)] = Value::of_real(0.0); break;
      case Kind::Node: slots[static_cast<size_t>(i)] = Value::of_node(-1); break;
      case Kind::ArrayRef: slots[static_cast<size_t>(i)] = Value::of_array(-1); break;
    }
  }
  return slots;
}

std::vector<Value> Engine::bind_entry_args(const WorkloadInput& in,
                                           Memory& mem) const {
  const Function& f = prog_.functions[static_cast<size_t>(entry_)];
  std::vector<Value> args;
  for (const auto& prm : f.params) {
    switch (prm.kind) {
      case Kind::Int: {
        auto it = in.ints.find(prm.name);
        if (it == in.ints.end())
          fail(InterpError::Kind::BadInput,
               "missing int input '" + prm.name + "'");
        args.push_back(Value::of_int(it->second));
        break;
      }
      case Kind::Real: {
        auto it = in.reals.find(prm.name);
        if (it == in.reals.end())
          fail(InterpError::Kind::BadInput,
               "missing real input '" + prm.name + "'");
        args.push_back(Value::of_real(it->second));
        break;
      }
      case Kind::Node: {
        auto it = in.lists.find(prm.name);
        if (it == in.lists.end())
          fail(InterpError::Kind::BadInput,
               "missing list input '" + prm.name + "'");
        int32_t head = -1;
        // append chained nodes; build back to front
        size_t base = mem.nodes.data.size();
        size_t len = it->second.size();
        mem.nodes.data.resize(base + len);
        mem.nodes.next.resize(base + len);
        for (size_t i = 0; i < len; ++i) {
          mem.nodes.data[base + i] = it->second[i];
          mem.nodes.next[base + i] =
              (i + 1 < len) ? static_cast<int32_t>(base + i + 1) : -1;
        }
        if (len > 0) head = static_cast<int32_t>(base);
        args.push_back(Value::of_node(head));
        break;
      }
      case Kind::ArrayRef:
        fail(InterpError::Kind::BadInput, "entry array parameter unsupported");
    }
  }
  return args;
}

Engine::Counts Engine::make_counts() const {
  Counts c;
  c.per_func.resize(funcs_.size());
  for (size_t i = 0; i < funcs_.size(); ++i)
    c.per_func[i].assign(static_cast<size_t>(funcs_[i].instr_count), 0);
  return c;
}

void Engine::exec_rinstr(const RFunction& rf, const RInstr& I,
                         std::vector<Value>& slots, Ctx& ctx,
                         std::optional<Value>* ret, int* next_pc) const {
  auto arg = [&](const RArg& a) -> const Value& {
    return a.slot >= 0 ? slots[static_cast<size_t>(a.slot)] : a.lit;
  };
  switch (I.op) {
    case Opcode::ConstAssign:
    case Opcode::Copy: {
      Value v = arg(I.a);
      // int literal/var into a real slot promotes
      if (rf.slot_kinds[static_cast<size_t>(I.dst)] == Kind::Real && v.k == Kind::Int)
        v = Value::of_real(static_cast<double>(v.i));
      slots[static_cast<size_t>(I.dst)] = v;
      break;
    }
    case Opcode::Neg: {
      const Value& v = arg(I.a);
      slots[static_cast<size_t>(I.dst)] =
          v.k == Kind::Real ? Value::of_real(-v.r) : Value::of_int(-v.i);
      break;
    }
    case Opcode::Bin: {
      Value v = eval_bin(I.bin, arg(I.a), arg(I.b));
      if (rf.slot_kinds[static_cast<size_t>(I.dst)] == Kind::Real && v.k == Kind::Int)
        v = Value::of_real(static_cast<double>(v.i));
      slots[static_cast<size_t>(I.dst)] = v;
      break;
    }
    case Opcode::ArrayLoad: {
      int g = I.arr_global >= 0 ? I.arr_global
                                : slots[static_cast<size_t>(I.arr_slot)].arr;
      if (g < 0) fail(InterpError::Kind::BadInput, "unbound array reference");
      ArrayStorage& st = ctx.mem.array(g);
      int64_t idx = checked_index(arg(I.a));
      if (idx < 0 || static_cast<size_t>(idx) >= st.size())
        fail(InterpError::Kind::Bounds,
             "array index out of bounds in " + rf.name);
      slots[static_cast<size_t>(I.dst)] =
          st.elem == Kind::Int ? Value::of_int(st.ints[static_cast<size_t>(idx)])
                               : Value::of_real(st.reals[static_cast<size_t>(idx)]);
      break;
    }
    case Opcode::ArrayStore: {
      int g = I.arr_global >= 0 ? I.arr_global
                                : slots[static_cast<size_t>(I.arr_slot)].arr;
      if (g < 0) fail(InterpError::Kind::BadInput, "unbound array reference");
      ArrayStorage& st = ctx.mem.array(g);
      int64_t idx = checked_index(arg(I.a));
      if (idx < 0 || static_cast<size_t>(idx) >= st.size())
        fail(InterpError::Kind::Bounds,
             "array index out of bounds in " + rf.name);
      const Value& v = arg(I.b);
      if (st.elem == Kind::Int)
        st.ints[static_cast<size_t>(idx)] = v.k == Kind::Int ? v.i : static_cast<int64_t>(v.r);
      else
        st.reals[static_cast<size_t>(idx)] = v.as_real();
      break;
    }
    case Opcode::LoadData: {
      int32_t n = slots[static_cast<size_t>(I.a.slot)].node;
      if (n < 0) fail(InterpError::Kind::NullDeref, "null node dereference");
      slots[static_cast<size_t>(I.dst)] =
          Value::of_real(ctx.mem.nodes().data[static_cast<size_t>(n)]);
      break;
    }
    case Opcode::LoadNext: {
      int32_t n = slots[static_cast<size_t>(I.a.slot)].node;
      if (n < 0) fail(InterpError::Kind::NullDeref, "null node dereference");
      slots[static_cast<size_t>(I.dst)] =
          Value::of_node(ctx.mem.nodes().next[static_cast<size_t>(n)]);
      break;
    }
    case Opcode::Call: {
      if (I.intrinsic >= 0) {
        double x = arg(I.args[0]).as_real();
        double y = I.intrinsic == 0 ? std::cos(x)
                  : I.intrinsic == 1 ? std::sin(x)
                                     : std::sqrt(x);
        if (I.dst >= 0) slots[static_cast<size_t>(I.dst)] = Value::of_real(y);
        break;
      }
      std::vector<Value> cargs;
      cargs.reserve(I.args.size());
      for (const auto& a : I.args) cargs.push_back(arg(a));
      auto rv = call(I.callee_fn, std::move(cargs), ctx);
      if (I.dst >= 0) {
        if (!rv) fail(InterpError::Kind::BadInput, "void call result used");
        Value v = *rv;
        if (rf.slot_kinds[static_cast<size_t>(I.dst)] == Kind::Real && v.k == Kind::Int)
          v = Value::of_real(static_cast<double>(v.i));
        slots[static_cast<size_t>(I.dst)] = v;
      }
      break;
    }
    case Opcode::Jump:
      *next_pc = I.t_target;
      break;
    case Opcode::CondBr: {
      const Value& c = arg(I.a);
      *next_pc = (c.i != 0) ? I.t_target : I.f_target;
      break;
    }
    case Opcode::Ret:
      if (I.ret_has_value)
        *ret = arg(I.a);
      else
        *ret = std::nullopt;
      *next_pc = -1;  // signals return
      break;
  }
}

std::optional<Value> Engine::call(int func, std::vector<Value> args,
                                  Ctx& ctx) const {
  if (++ctx.call_depth > kMaxCallDepth)
    fail(InterpError::Kind::CallDepth, "call depth limit exceeded");
  const RFunction& rf = funcs_[static_cast<size_t>(func)];
  std::vector<Value> slots = init_slots(func);
  for (size_t i = 0; i < args.size(); ++i) {
    Value v = args[i];
    if (rf.param_kinds[i] == Kind::Real && v.k == Kind::Int)
      v = Value::of_real(static_cast<double>(v.i));
    slots[i] = v;
  }

  const bool hooked = ctx.hooks && ctx.hooks->func == func;
  std::optional<Value> ret;
  bool returned = false;
  int pc = 0;
  while (!returned) {
    const RInstr& I = rf.code[static_cast<size_t>(pc)];
    if (--ctx.fuel <= 0) fail(InterpError::Kind::Fuel, "fuel exhausted");
    ++ctx.steps;
    if (ctx.counts)
      ++ctx.counts->per_func[static_cast<size_t>(func)][static_cast<size_t>(I.orig)];
    if (ctx.trace) ctx.trace->push_back({func, I.orig});

    if (hooked) {
      const ExecHooks& h = *ctx.hooks;
      if (!h.replaced.empty() && h.replaced[static_cast<size_t>(I.orig)]) {
        h.on_replaced(I.orig, slots);
        ++pc;
        continue;
      }
      if (!h.observed.empty() && h.observed[static_cast<size_t>(I.orig)])
        h.on_observed(I.orig, slots);
      if (I.orig == h.watch_branch) {
        const Value& c = I.a.slot >= 0 ? slots[static_cast<size_t>(I.a.slot)] : I.a.lit;
        bool takes_then = c.i != 0;
        if (takes_then == h.exit_is_then) h.on_branch_exit(slots);
      }
    }

    int next_pc = pc + 1;
    std::optional<Value> r;
    exec_rinstr(rf, I, slots, ctx, &r, &next_pc);
    if (next_pc == -1) {
      ret = r;
      returned = true;
    } else {
      pc = next_pc;
    }
  }
  --ctx.call_depth;
  return ret;
}

void Engine::run_instr_subset(int func, const std::vector<InstrId>& ids,
                              std::vector<Value>& slots, Ctx& ctx) const {
  const RFunction& rf = funcs_[static_cast<size_t>(func)];
  for (InstrId id : ids) run_one(func, id, slots, ctx);
  (void)rf;
}

void Engine::run_one(int func, InstrId id, std::vector<Value>& slots,
                     Ctx& ctx) const {
  const RFunction& rf = funcs_[static_cast<size_t>(func)];
  int ci = rf.code_of_orig[static_cast<size_t>(id)];
  const RInstr& I = rf.code[static_cast<size_t>(ci)];
  if (I.op == Opcode::Jump || I.op == Opcode::CondBr || I.op == Opcode::Ret)
    fail(InterpError::Kind::BadInput, "terminator in straight-line subset");
  if (--ctx.fuel <= 0) fail(InterpError::Kind::Fuel, "fuel exhausted");
  ++ctx.steps;
  int next_pc = 0;
  std::optional<Value> r;
  exec_rinstr(rf, I, slots, ctx, &r, &next_pc);
}

ExecutionResult Engine::run(const WorkloadInput& in,
                            const InterpOptions& opts) const {
  Memory mem = make_memory(in);
  Ctx ctx(&mem);
  ctx.fuel = opts.fuel;
  Counts counts = make_counts();
  ctx.counts = &counts;
  ExecutionResult res;
  if (opts.trace) ctx.trace = &res.trace;

  std::vector<Value> args = bind_entry_args(in, mem);
  auto ret = call(entry_, std::move(args), ctx);

  res.step_count = ctx.steps;
  res.per_instr_counts = std::move(counts.per_func);
  for (size_t g = 0; g < prog_.globals.size(); ++g) {
    OutputValue ov;
    ov.kind = prog_.globals[g].elem;
    if (ov.kind == Kind::Int)
      ov.ints = mem.arrays[g].ints;
    else
      ov.reals = mem.arrays[g].reals;
    res.outputs.push_back({prog_.globals[g].name, std::move(ov)});
  }
  if (ret) {
    OutputValue ov;
    ov.scalar = true;
    if (ret->k == Kind::Int) {
      ov.kind = Kind::Int;
      ov.ints.push_back(ret->i);
    } else {
      ov.kind = Kind::Real;
      ov.reals.push_back(ret->as_real());
    }
    res.outputs.push_back({"ret", std::move(ov)});
  }
  return res;
}

ExecutionResult interpret(const Program& p, const WorkloadInput& in,
                          const InterpOptions& opts) {
  validate_or_throw(p);
  Engine eng(p);
  return eng.run(in, opts);
}

}  // namespace pipeslice

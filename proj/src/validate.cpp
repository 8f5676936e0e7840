#include "pipeslice/validate.hpp"

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace pipeslice {

namespace {

struct Checker {
  const Program& p;
  std::vector<Diagnostic>& out;

  void report(const std::string& entity, const std::string& msg) {
    out.push_back({entity, msg});
  }

  // kind of a scalar variable within f, or nullopt if undeclared/not scalar
  std::map<std::string, Kind> scalar_kinds{};
  std::set<std::string> array_names{};  // globals + array-ref params
  std::string fname{};

  void build_env(const Function& f) {
    scalar_kinds.clear();
    array_names.clear();
    fname = f.name;
    for (const auto& g : p.globals) array_names.insert(g.name);
    for (const auto& prm : f.params) {
      if (prm.kind == Kind::ArrayRef)
        array_names.insert(prm.name);
      else
        scalar_kinds[prm.name] = prm.kind;
    }
    for (const auto& l : f.locals) scalar_kinds[l.name] = l.kind;
  }

  bool known_scalar(const std::string& v) { return scalar_kinds.count(v) > 0; }

  std::optional<Kind> operand_kind(const Operand& o) {
    switch (o.k) {
      case Operand::K::None: return std::nullopt;
      case Operand::K::IntLit: return Kind::Int;
      case Operand::K::RealLit: return Kind::Real;
      case Operand::K::NullLit: return Kind::Node;
      case Operand::K::Var: {
        auto it = scalar_kinds.find(o.var);
        if (it != scalar_kinds.end()) return it->second;
        if (array_names.count(o.var)) return Kind::ArrayRef;
        report(fname, "undeclared variable '" + o.var + "'");
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  void check_scalar_operand(const Operand& o, const char* role) {
    auto k = operand_kind(o);
    if (k && (*k == Kind::ArrayRef))
      report(fname, std::string("array used as scalar ") + role + " '" +
                        (o.is_var() ? o.var : "?") + "'");
  }

  void check_int_operand(const Operand& o, const char* role) {
    auto k = operand_kind(o);
    if (k && *k != Kind::Int)
      report(fname, std::string(role) + " must be int");
  }

  void check_def(const std::string& dst, Kind required, bool allow_promote) {
    auto it = scalar_kinds.find(dst);
    if (it == scalar_kinds.end()) {
      if (array_names.count(dst))
        report(fname, "array '" + dst + "' cannot be assigned as scalar");
      else
        report(fname, "undeclared variable '" + dst + "'");
      return;
    }
    Kind have = it->second;
    if (have == required) return;
    if (allow_promote && required == Kind::Int && have == Kind::Real) return;
    report(fname, "kind mismatch assigning " + std::string(kind_name(required)) +
                      " to '" + dst + "' (" + kind_name(have) + ")");
  }

  void check_array_elem_def(const std::string& dst, const GlobalArray* g) {
    // loads from real[] params have Real elements
    Kind elem = g ? g->elem : Kind::Real;
    check_def(dst, elem, true);
  }

  const GlobalArray* array_decl(const std::string& name) {
    return p.find_global(name);
  }

  void check_array_name(const std::string& name) {
    if (!array_names.count(name))
      report(fname, "unknown array '" + name + "'");
  }

  void check_instr(const Function& f, const Instr& i) {
    switch (i.op) {
      case Opcode::ConstAssign: {
        auto k = operand_kind(i.a);
        if (k) check_def(i.dst, *k, true);
        break;
      }
      case Opcode::Copy: {
        auto k = operand_kind(i.a);
        if (k) {
          if (*k == Kind::ArrayRef)
            report(fname, "array '" + i.a.var + "' copied as scalar");
          else
            check_def(i.dst, *k, true);
        }
        break;
      }
      case Opcode::Neg: {
        check_scalar_operand(i.a, "operand");
        auto k = operand_kind(i.a);
        if (k && *k == Kind::Node)
          report(fname, "cannot negate node value");
        if (k && *k != Kind::Node) check_def(i.dst, *k, true);
        break;
      }
      case Opcode::Bin: {
        auto ka = operand_kind(i.a);
        auto kb = operand_kind(i.b);
        if (!ka || !kb) break;
        bool node_cmp = (i.bin == BinOp::Eq || i.bin == BinOp::Ne) &&
                        (*ka == Kind::Node || *kb == Kind::Node);
        if (node_cmp) {
          if (*ka != Kind::Node || *kb != Kind::Node)
            report(fname, "node compared with non-node");
          check_def(i.dst, Kind::Int, true);
          break;
        }
        if (*ka == Kind::Node || *kb == Kind::Node) {
          report(fname, "node value in arithmetic");
          break;
        }
        if (*ka == Kind::ArrayRef || *kb == Kind::ArrayRef) {
          report(fname, "array value in arithmetic");
          break;
        }
        if (i.bin == BinOp::Mod && (*ka == Kind::Real || *kb == Kind::Real))
          report(fname, "'%' requires int operands");
        if (binop_is_compare(i.bin)) {
          check_def(i.dst, Kind::Int, true);
        } else {
          Kind r = (*ka == Kind::Real || *kb == Kind::Real) ? Kind::Real
                                                            : Kind::Int;
          check_def(i.dst, r, true);
        }
        break;
      }
      case Opcode::ArrayLoad: {
        check_array_name(i.array);
        check_int_operand(i.a, "array index");
        check_array_elem_def(i.dst, array_decl(i.array));
        break;
      }
      case Opcode::ArrayStore: {
        check_array_name(i.array);
        check_int_operand(i.a, "array index");
        check_scalar_operand(i.b, "store value");
        if (f.pure)
          report(fname, "purity violation: store to '" + i.array + "'");
        break;
      }
      case Opcode::LoadData:
      case Opcode::LoadNext: {
        auto it = scalar_kinds.find(i.base);
        if (it == scalar_kinds.end())
          report(fname, "undeclared variable '" + i.base + "'");
        else if (it->second != Kind::Node)
          report(fname, "field access on non-node '" + i.base + "'");
        check_def(i.dst, i.op == Opcode::LoadData ? Kind::Real : Kind::Node,
                  i.op == Opcode::LoadData);
        break;
      }
      case Opcode::Call: {
        check_call(f, i);
        break;
      }
      case Opcode::Jump:
        break;
      case Opcode::CondBr: {
        if (!i.a.is_var() || !known_scalar(i.a.var))
          report(fname, "branch variable undeclared");
        else if (scalar_kinds[i.a.var] != Kind::Int)
          report(fname, "branch variable must be int");
        break;
      }
      case Opcode::Ret: {
        if (i.a.present()) {
          check_scalar_operand(i.a, "return value");
          if (!f.return_kind)
            report(fname, "ret with value in void function");
        } else if (f.return_kind) {
          report(fname, "ret without value in value-returning function");
        }
        break;
      }
    }
  }

  void check_call(const Function& caller, const Instr& i) {
    if (is_intrinsic(i.callee)) {
      if (i.args.size() != 1)
        report(fname, "intrinsic '" + i.callee + "' takes 1 argument");
      else
        check_scalar_operand(i.args[0], "intrinsic argument");
      if (!i.dst.empty()) check_def(i.dst, Kind::Real, false);
      return;
    }
    const Function* callee = p.find_function(i.callee);
    if (!callee) {
      report(fname, "unresolved call to '" + i.callee + "'");
      return;
    }
    if (caller.pure && !callee->pure)
      report(fname, "purity violation: call to non-pure '" + i.callee + "'");
    if (i.args.size() != callee->params.size()) {
      report(fname, "call to '" + i.callee + "' arity mismatch");
      return;
    }
    for (size_t a = 0; a < i.args.size(); ++a) {
      auto k = operand_kind(i.args[a]);
      if (!k) continue;
      Kind want = callee->params[a].kind;
      bool ok = (*k == want) || (want == Kind::Real && *k == Kind::Int);
      if (!ok)
        report(fname, "call to '" + i.callee + "' argument " +
                          std::to_string(a + 1) + " kind mismatch");
    }
    if (!i.dst.empty()) {
      if (!callee->return_kind)
        report(fname, "result of void call to '" + i.callee + "'");
      else
        check_def(i.dst, *callee->return_kind, true);
    }
  }

  void check_function(const Function& f) {
    build_env(f);
    std::set<std::string> labels;
    for (const auto& b : f.body)
      if (!labels.insert(b.label).second)
        report(f.name, "duplicate label '" + b.label + "'");
    int exits = 0;
    for (const auto& b : f.body) {
      for (const auto& i : b.instrs) {
        if (i.is_terminator()) {
          report(f.name, "terminator in instruction list of block '" +
                             b.label + "'");
          continue;
        }
        check_instr(f, i);
      }
      const Instr& t = b.terminator;
      if (!t.is_terminator()) {
        report(f.name, "block '" + b.label + "' lacks terminator");
        continue;
      }
      check_instr(f, t);
      if (t.op == Opcode::Ret) ++exits;
      if (t.op == Opcode::Jump && !labels.count(t.label1))
        report(f.name, "jump to unknown label '" + t.label1 + "'");
      if (t.op == Opcode::CondBr) {
        if (!labels.count(t.label1))
          report(f.name, "branch to unknown label '" + t.label1 + "'");
        if (!labels.count(t.label2))
          report(f.name, "branch to unknown label '" + t.label2 + "'");
      }
    }
    if (exits != 1)
      report(f.name, "function must have exactly one exit block (found " +
                         std::to_string(exits) + ")");
  }
};

}  // namespace

std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> out;
  Checker c{p, out};

  std::set<std::string> fnames;
  for (const auto& f : p.functions)
    if (!fnames.insert(f.name).second)
      c.report(f.name, "duplicate function name");
  std::set<std::string> gnames;
  for (const auto& g : p.globals) {
    if (!gnames.insert(g.name).second) c.report(g.name, "duplicate global");
    if (g.length < 1) c.report(g.name, "global length must be >= 1");
  }
  if (!p.find_function(p.entry)) c.report(p.entry, "entry not found");

  for (const auto& f : p.functions) c.check_function(f);

  const Function* entry = p.find_function(p.entry);
  if (entry) {
    for (const auto& prm : entry->params)
      if (prm.kind == Kind::ArrayRef)
        c.report(entry->name,
                 "entry parameter '" + prm.name + "' cannot be an array");
  }
  return out;
}

void validate_or_throw(const Program& p) {
  auto ds = validate(p);
  if (ds.empty()) return;
  std::ostringstream s;
  s << "validation failed:";
  for (const auto& d : ds) s << "\n  " << d.str();
  throw std::runtime_error(s.str());
}

}  // namespace pipeslice

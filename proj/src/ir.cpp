#include "pipeslice/ir.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pipeslice {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Int: return "int";
    case Kind::Real: return "real";
    case Kind::ArrayRef: return "real[]";
    case Kind::Node: return "node";
  }
  return "?";
}

const char* binop_symbol(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
  }
  return "?";
}

bool binop_is_compare(BinOp op) {
  switch (op) {
    case BinOp::Lt: case BinOp::Le: case BinOp::Gt:
    case BinOp::Ge: case BinOp::Eq: case BinOp::Ne:
      return true;
    default:
      return false;
  }
}

bool opcode_is_terminator(Opcode op) {
  return op == Opcode::Jump || op == Opcode::CondBr || op == Opcode::Ret;
}

Operand Operand::make_var(std::string name) {
  Operand o;
  o.k = K::Var;
  o.var = std::move(name);
  return o;
}

Operand Operand::make_int(int64_t v) {
  Operand o;
  o.k = K::IntLit;
  o.ival = v;
  return o;
}

Operand Operand::make_real(double v) {
  Operand o;
  o.k = K::RealLit;
  o.rval = v;
  return o;
}

Operand Operand::make_null() {
  Operand o;
  o.k = K::NullLit;
  return o;
}

bool Operand::operator==(const Operand& o) const {
  if (k != o.k) return false;
  switch (k) {
    case K::None: return true;
    case K::Var: return var == o.var;
    case K::IntLit: return ival == o.ival;
    case K::RealLit: return rval == o.rval;
    case K::NullLit: return true;
  }
  return false;
}

namespace {

void add_operand_use(const Operand& o, std::vector<std::string>& out) {
  if (o.is_var()) out.push_back(o.var);
}

std::string operand_text(const Operand& o) {
  switch (o.k) {
    case Operand::K::None: return "";
    case Operand::K::Var: return o.var;
    case Operand::K::IntLit: return std::to_string(o.ival);
    case Operand::K::NullLit: return "null";
    case Operand::K::RealLit: {
      // shortest form that survives a round trip and always re-parses as real
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", o.rval);
      std::string s = buf;
      if (s.find_first_of(".eE") == std::string::npos &&
          s.find_first_of("in") == std::string::npos) {  // inf/nan guard
        s += ".0";
      }
      return s;
    }
  }
  return "?";
}

}  // namespace

std::vector<std::string> Instr::defs() const {
  std::vector<std::string> out;
  if (!dst.empty()) out.push_back(dst);
  return out;
}

std::vector<std::string> Instr::uses() const {
  std::vector<std::string> out;
  switch (op) {
    case Opcode::ConstAssign:
      break;
    case Opcode::Copy:
    case Opcode::Neg:
      add_operand_use(a, out);
      break;
    case Opcode::Bin:
      add_operand_use(a, out);
      add_operand_use(b, out);
      break;
    case Opcode::ArrayLoad:
      out.push_back(array);
      add_operand_use(a, out);  // index
      break;
    case Opcode::ArrayStore:
      out.push_back(array);
      add_operand_use(a, out);  // index
      add_operand_use(b, out);  // value
      break;
    case Opcode::LoadData:
    case Opcode::LoadNext:
      out.push_back(base);
      break;
    case Opcode::Call:
      for (const auto& arg : args) add_operand_use(arg, out);
      break;
    case Opcode::Jump:
      break;
    case Opcode::CondBr:
      add_operand_use(a, out);
      break;
    case Opcode::Ret:
      add_operand_use(a, out);
      break;
  }
  return out;
}

std::optional<std::string> Instr::may_touch() const {
  switch (op) {
    case Opcode::ArrayLoad:
    case Opcode::ArrayStore:
      return array;
    case Opcode::LoadData:
    case Opcode::LoadNext:
      return std::string("$nodes");
    default:
      return std::nullopt;
  }
}

bool Instr::touches_write() const { return op == Opcode::ArrayStore; }

std::string Instr::text() const {
  std::ostringstream s;
  switch (op) {
    case Opcode::ConstAssign:
    case Opcode::Copy:
      s << dst << " = " << operand_text(a);
      break;
    case Opcode::Neg:
      s << dst << " = -" << operand_text(a);
      break;
    case Opcode::Bin:
      s << dst << " = " << operand_text(a) << " " << binop_symbol(bin) << " "
        << operand_text(b);
      break;
    case Opcode::ArrayLoad:
      s << dst << " = " << array << "[" << operand_text(a) << "]";
      break;
    case Opcode::ArrayStore:
      s << array << "[" << operand_text(a) << "] = " << operand_text(b);
      break;
    case Opcode::LoadData:
      s << dst << " = " << base << ".data";
      break;
    case Opcode::LoadNext:
      s << dst << " = " << base << ".next";
      break;
    case Opcode::Call: {
      if (!dst.empty()) s << dst << " = ";
      s << "call " << callee << "(";
      for (size_t i = 0; i < args.size(); ++i) {
        if (i) s << ", ";
        s << operand_text(args[i]);
      }
      s << ")";
      break;
    }
    case Opcode::Jump:
      s << "jump " << label1;
      break;
    case Opcode::CondBr:
      s << "br " << operand_text(a) << " " << label1 << " " << label2;
      break;
    case Opcode::Ret:
      s << "ret";
      if (a.present()) s << " " << operand_text(a);
      break;
  }
  return s.str();
}

bool Instr::operator==(const Instr& o) const {
  return op == o.op && dst == o.dst && a == o.a && b == o.b && bin == o.bin &&
         array == o.array && base == o.base && callee == o.callee &&
         args == o.args && label1 == o.label1 && label2 == o.label2;
}

bool Block::operator==(const Block& o) const {
  return label == o.label && instrs == o.instrs && terminator == o.terminator;
}

const Block* Function::find_block(const std::string& label) const {
  for (const auto& b : body)
    if (b.label == label) return &b;
  return nullptr;
}

const Instr* Function::find_instr(InstrId id) const {
  for (const auto& b : body) {
    for (const auto& i : b.instrs)
      if (i.id == id) return &i;
    if (b.terminator.id == id) return &b.terminator;
  }
  return nullptr;
}

std::vector<const Instr*> Function::all_instrs() const {
  std::vector<const Instr*> out(static_cast<size_t>(instr_count), nullptr);
  for (const auto& b : body) {
    for (const auto& i : b.instrs) out[static_cast<size_t>(i.id)] = &i;
    out[static_cast<size_t>(b.terminator.id)] = &b.terminator;
  }
  return out;
}

bool Function::operator==(const Function& o) const {
  return name == o.name && params == o.params && locals == o.locals &&
         return_kind == o.return_kind && pure == o.pure && body == o.body;
}

const Function* Program::find_function(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

Function* Program::find_function(const std::string& name) {
  for (auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

const GlobalArray* Program::find_global(const std::string& name) const {
  for (const auto& g : globals)
    if (g.name == name) return &g;
  return nullptr;
}

bool Program::operator==(const Program& o) const {
  return globals == o.globals && entry == o.entry && functions == o.functions;
}

bool is_intrinsic(const std::string& name) {
  return name == "cos" || name == "sin" || name == "sqrt";
}

std::string pretty_print(const Function& f) {
  std::ostringstream s;
  s << "func " << f.name << "(";
  for (size_t i = 0; i < f.params.size(); ++i) {
    if (i) s << ", ";
    s << f.params[i].name << ": " << kind_name(f.params[i].kind);
  }
  s << ")";
  if (f.return_kind) s << " -> " << kind_name(*f.return_kind);
  if (f.pure) s << " pure";
  s << " {\n";
  for (const auto& l : f.locals)
    s << "  local " << l.name << ": " << kind_name(l.kind) << "\n";
  for (const auto& b : f.body) {
    s << b.label << ":\n";
    for (const auto& i : b.instrs) s << "  " << i.text() << "\n";
    s << "  " << b.terminator.text() << "\n";
  }
  s << "}\n";
  return s.str();
}

std::string pretty_print(const Program& p) {
  std::ostringstream s;
  for (const auto& g : p.globals)
    s << "global " << g.name << ": " << kind_name(g.elem) << "[" << g.length
      << "]\n";
  if (!p.globals.empty()) s << "\n";
  s << "entry " << p.entry << "\n\n";
  for (const auto& f : p.functions) s << pretty_print(f) << "\n";
  return s.str();
}

void renumber(Function& f) {
  InstrId next = 0;
  for (auto& b : f.body) {
    for (auto& i : b.instrs) i.id = next++;
    b.terminator.id = next++;
  }
  f.instr_count = next;
}

void renumber(Program& p) {
  for (auto& f : p.functions) renumber(f);
}

}  // namespace pipeslice

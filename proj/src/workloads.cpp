#include "pipeslice/workloads.hpp"

#include <stdexcept>

#include "pipeslice/parser.hpp"
#include "pipeslice/validate.hpp"

namespace pipeslice::workloads {

namespace {

// Two independent passes over a window per item. The kernels are pure and
// single-result, so the transform stops at the plain two-stage pipeline:
// traversal + first pass on one worker, second pass on the other.
const char* kOverhead = R"(
global image: real[2048]
global out_lo: real[2048]
global out_hi: real[2048]

entry main

func main(N: int, M: int) {
  local i1: int
  local idx: int
  local v: real
  local s1: real
  local s2: real
  local c: int
entry:
  i1 = 0
  jump loop
loop:
  c = i1 < N
  br c body done
body:
  idx = i1 % 2048
  v = image[idx]
  s1 = call conv_lo(v, M)
  out_lo[idx] = s1
  s2 = call conv_hi(v, M)
  out_hi[idx] = s2
  i1 = i1 + 1
  jump loop
done:
  ret
}

func conv_lo(v: real, M: int) -> real pure {
  local z: int
  local a: int
  local sum: real
  local c: int
  local ci: int
entry:
  sum = 0.0
  z = 1
  jump zloop
zloop:
  c = z < M
  br c zbody zdone
zbody:
  a = 1
  jump aloop
aloop:
  ci = a < 6
  br ci abody adone
abody:
  sum = sum + v
  a = a + 1
  jump aloop
adone:
  z = z + 1
  jump zloop
zdone:
  ret sum
}

func conv_hi(v: real, M: int) -> real pure {
  local z: int
  local a: int
  local sum: real
  local u: real
  local c: int
  local ci: int
  local big: int
entry:
  sum = 0.0
  z = 1
  jump zloop
zloop:
  c = z < M
  br c zbody zdone
zbody:
  a = 1
  jump aloop
aloop:
  ci = a < 6
  br ci abody adone
abody:
  u = v * 0.125
  sum = sum + u
  a = a + 1
  jump aloop
adone:
  big = sum > 100000.0
  br big clamp next
clamp:
  sum = 100000.0
  jump next
next:
  z = z + 1
  jump zloop
zdone:
  ret sum
}
)";

// Fourier-style accumulation: both tables share the angle/weight prefix.
const char* kFftlike = R"(
global fre: real[512]
global fim: real[512]

entry main

func main(iters: int, M: int) {
  local k: int
  local c: int
entry:
  k = 0
  jump loop
loop:
  c = k < iters
  br c body done
body:
  call fourier(k, M)
  k = k + 1
  jump loop
done:
  ret
}

func fourier(k: int, M: int) {
  local kk: int
  local j: int
  local c: int
  local t0: real
  local t1: real
  local ang: real
  local w: real
  local u: real
  local a0: real
  local a1: real
  local re0: real
  local re1: real
  local im0: real
  local im1: real
entry:
  kk = k % 512
  j = 0
  jump loop
loop:
  c = j < M
  br c body done
body:
  t0 = k * 0.01
  t1 = j * 0.13
  ang = t0 + t1
  w = call sin(ang)
  u = call cos(ang)
  a0 = w * u
  re0 = fre[kk]
  re1 = re0 + a0
  fre[kk] = re1
  a1 = w - u
  im0 = fim[kk]
  im1 = im0 + a1
  fim[kk] = im1
  j = j + 1
  jump loop
done:
  ret
}
)";

// First and second finite differences of a moving sample point,
// accumulated per item.
const char* kDeriv = R"(
global f1: real[512]
global f2: real[512]

entry main

func main(iters: int, M: int) {
  local k: int
  local c: int
entry:
  k = 0
  jump loop
loop:
  c = k < iters
  br c body done
body:
  call dstep(k, M)
  k = k + 1
  jump loop
done:
  ret
}

func dstep(k: int, M: int) {
  local idx: int
  local j: int
  local c: int
  local x: real
  local t: real
  local xp: real
  local xm: real
  local s0: real
  local s1: real
  local s2: real
  local num1: real
  local g1: real
  local a: real
  local a2: real
  local tt: real
  local twice: real
  local n2: real
  local n2b: real
  local g2: real
  local b: real
  local b2: real
entry:
  idx = k % 512
  x = k * 0.003
  j = 1
  jump loop
loop:
  c = j < M
  br c body done
body:
  t = j * 0.001
  xp = x + t
  xm = x - t
  s0 = call sin(x)
  s1 = call sin(xp)
  s2 = call sin(xm)
  num1 = s1 - s0
  g1 = num1 / t
  a = f1[idx]
  a2 = a + g1
  f1[idx] = a2
  tt = t * t
  twice = s0 + s0
  n2 = s1 - twice
  n2b = n2 + s2
  g2 = n2b / tt
  b = f2[idx]
  b2 = b + g2
  f2[idx] = b2
  j = j + 1
  jump loop
done:
  ret
}
)";

// An init call feeding a four-argument accumulation kernel; the kernel
// carries a scalar recurrence both output chains share.
const char* kSphharm = R"(
global ctab: real[512]
global stab: real[512]

entry main

func main(L: int, M: int) {
  local i: int
  local cnd: int
  local v: real
entry:
  i = 0
  jump loop
loop:
  cnd = i < L
  br cnd body done
body:
  v = call sh_init(i)
  call sh_accum(i, v, M, 0.37)
  i = i + 1
  jump loop
done:
  ret
}

func sh_init(i: int) -> real pure {
  local t: real
  local u: real
  local uu: real
entry:
  t = i * 0.02
  u = call sin(t)
  uu = u + 1.5
  ret uu
}

func sh_accum(i: int, v: real, M: int, theta: real) {
  local idx: int
  local j: int
  local c: int
  local p: real
  local p0: real
  local t0: real
  local t2: real
  local cc: real
  local cval: real
  local co: real
  local co2: real
  local ss: real
  local sval: real
  local so: real
  local so2: real
entry:
  idx = i % 512
  p = 1.0
  j = 1
  jump loop
loop:
  c = j < M
  br c body done
body:
  t0 = theta * j
  p0 = p * 0.995
  p = p0 + 0.001
  t2 = v * p
  cc = call cos(t0)
  cval = t2 * cc
  co = ctab[idx]
  co2 = co + cval
  ctab[idx] = co2
  ss = call sin(t0)
  sval = t2 * ss
  so = stab[idx]
  so2 = so + sval
  stab[idx] = so2
  j = j + 1
  jump loop
done:
  ret
}
)";

// List traversal calling a two-output kernel that returns nothing.
const char* kLinkedlist2 = R"(
global ga: real[512]
global gb: real[512]

entry main

func main(inner_len: int, head: node) {
  local nd: node
  local i: int
  local c: int
  local x: real
entry:
  i = 0
  nd = head
  jump loop
loop:
  c = nd != null
  br c body done
body:
  x = nd.data
  call ll_work(x, i, inner_len)
  i = i + 1
  nd = nd.next
  jump loop
done:
  ret
}

func ll_work(x: real, i: int, M: int) {
  local idx: int
  local j: int
  local c: int
  local m: real
  local t0: real
  local t1: real
  local a0: real
  local g0: real
  local g0n: real
  local a1: real
  local g1: real
  local g1n: real
entry:
  idx = i % 512
  m = 0.0
  j = 0
  jump loop
loop:
  c = j < M
  br c body done
body:
  t0 = x + j
  t1 = call sin(t0)
  m = m + t1
  a0 = m * 0.5
  g0 = ga[idx]
  g0n = g0 + a0
  ga[idx] = g0n
  a1 = call cos(m)
  g1 = gb[idx]
  g1n = g1 + a1
  gb[idx] = g1n
  j = j + 1
  jump loop
done:
  ret
}
)";

// Same traversal, but the kernel also returns a value the loop reduces
// into a running sum (one more buffer than linkedlist2).
const char* kLinkedlist3 = R"(
global ga: real[512]
global gb: real[512]

entry main

func main(inner_len: int, head: node) -> real {
  local nd: node
  local i: int
  local c: int
  local x: real
  local r: real
  local acc: real
entry:
  i = 0
  acc = 0.0
  nd = head
  jump loop
loop:
  c = nd != null
  br c body done
body:
  x = nd.data
  r = call ll_work3(x, i, inner_len)
  acc = acc + r
  i = i + 1
  nd = nd.next
  jump loop
done:
  ret acc
}

func ll_work3(x: real, i: int, M: int) -> real {
  local idx: int
  local j: int
  local c: int
  local m: real
  local r: real
  local t0: real
  local t1: real
  local a0: real
  local g0: real
  local g0n: real
  local a1: real
  local g1: real
  local g1n: real
entry:
  idx = i % 512
  m = 0.0
  r = 0.0
  j = 0
  jump loop
loop:
  c = j < M
  br c body done
body:
  t0 = x + j
  t1 = call sin(t0)
  m = m + t1
  a0 = m * 0.5
  g0 = ga[idx]
  g0n = g0 + a0
  ga[idx] = g0n
  a1 = call cos(m)
  g1 = gb[idx]
  g1n = g1 + a1
  gb[idx] = g1n
  r = r + t0
  j = j + 1
  jump loop
done:
  ret r
}
)";

// The worked example: list traversal calling a kernel that accumulates a
// scratch value and updates one out-parameter slot and one table.
const char* kListcalc = R"(
global b: real[4096]
global acc: real[1]

entry main

func main(n: int, m: int, head: node) {
  local i: int
  local node: node
  local c: int
  local din: real
entry:
  i = 0
  node = head
  jump loop
loop:
  c = node != null
  br c body done
body:
  din = node.data
  call calc(m, din, acc)
  i = i + 1
  node = node.next
  jump loop
done:
  ret
}

func calc(M: int, da_in: real, da_out: real[]) {
  local j: int
  local c: int
  local m: real
  local s: real
  local t0: real
  local t3: real
  local t4: real
  local t5: real
  local t6: real
  local t7: real
  local t8: real
  local t9: real
entry:
  b[0] = 0.0
  m = 0.0
  j = 0
  jump loop
loop:
  c = j < M
  br c body done
body:
  s = call seq(j)
  t0 = da_in + s
  m = m + t0
  t3 = call cos(m)
  t4 = da_in + t3
  t5 = da_out[0]
  t6 = t5 + t4
  da_out[0] = t6
  t7 = call xx(m)
  t8 = b[j]
  t9 = t8 + t7
  b[j] = t9
  j = j + 1
  jump loop
done:
  ret
}

func seq(k: int) -> real pure {
  local t: real
entry:
  t = k * 0.5
  ret t
}

func xx(v: real) -> real pure {
  local t: real
  local u: real
entry:
  t = call sin(v)
  u = t * 0.25
  ret u
}
)";

struct Entry {
  const char* text;
  bool listy;  // needs a head list
};

const std::map<std::string, Entry>& table() {
  static const std::map<std::string, Entry> t = {
      {"overhead", {kOverhead, false}},
      {"fftlike", {kFftlike, false}},
      {"deriv", {kDeriv, false}},
      {"sphharm", {kSphharm, false}},
      {"linkedlist2", {kLinkedlist2, true}},
      {"linkedlist3", {kLinkedlist3, true}},
      {"listcalc", {kListcalc, true}},
  };
  return t;
}

uint64_t splitmix(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double rand_real(uint64_t& s) {
  return static_cast<double>(splitmix(s) >> 11) / 9007199254740992.0 * 2.0;
}

}  // namespace

std::vector<std::string> names() {
  return {"overhead", "fftlike", "deriv", "sphharm", "linkedlist2",
          "linkedlist3"};
}

bool exists(const std::string& name) { return table().count(name) > 0; }

std::string source(const std::string& name) {
  auto it = table().find(name);
  if (it == table().end())
    throw std::runtime_error("unknown workload '" + name + "'");
  return it->second.text;
}

Program program(const std::string& name) {
  Program p = parse_program(source(name));
  validate_or_throw(p);
  return p;
}

std::map<std::string, int64_t> default_params(const std::string& name) {
  if (name == "overhead") return {{"N", 60}, {"M", 40}};
  if (name == "fftlike") return {{"iters", 40}, {"M", 60}};
  if (name == "deriv") return {{"iters", 40}, {"M", 60}};
  if (name == "sphharm") return {{"L", 40}, {"M", 60}};
  if (name == "linkedlist2" || name == "linkedlist3")
    return {{"outer_len", 40}, {"inner_len", 60}};
  if (name == "listcalc") return {{"n", 8}, {"m", 16}};
  throw std::runtime_error("unknown workload '" + name + "'");
}

std::map<std::string, int64_t> bench_params(const std::string& name) {
  if (name == "overhead") return {{"N", 600}, {"M", 400}};
  if (name == "fftlike") return {{"iters", 500}, {"M", 500}};
  if (name == "deriv") return {{"iters", 500}, {"M", 400}};
  if (name == "sphharm") return {{"L", 500}, {"M", 500}};
  if (name == "linkedlist2" || name == "linkedlist3")
    return {{"outer_len", 500}, {"inner_len", 500}};
  if (name == "listcalc") return {{"n", 400}, {"m", 400}};
  throw std::runtime_error("unknown workload '" + name + "'");
}

std::map<std::string, int64_t> random_params(const std::string& name,
                                             uint64_t seed) {
  uint64_t s = seed * 2654435761ULL + 17;
  auto draw = [&](int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(splitmix(s) % static_cast<uint64_t>(hi - lo + 1));
  };
  if (name == "overhead") return {{"N", draw(1, 24)}, {"M", draw(2, 24)}};
  if (name == "fftlike") return {{"iters", draw(1, 24)}, {"M", draw(1, 32)}};
  if (name == "deriv") return {{"iters", draw(1, 24)}, {"M", draw(2, 32)}};
  if (name == "sphharm") return {{"L", draw(1, 24)}, {"M", draw(2, 32)}};
  if (name == "linkedlist2" || name == "linkedlist3")
    return {{"outer_len", draw(0, 24)}, {"inner_len", draw(1, 32)}};
  if (name == "listcalc") return {{"n", draw(0, 12)}, {"m", draw(1, 16)}};
  throw std::runtime_error("unknown workload '" + name + "'");
}

WorkloadInput input(const std::string& name,
                    const std::map<std::string, int64_t>& params,
                    uint64_t seed) {
  auto it = table().find(name);
  if (it == table().end())
    throw std::runtime_error("unknown workload '" + name + "'");
  WorkloadInput in;
  uint64_t s = seed ^ 0xabcdef1234567890ULL;

  auto param = [&](const char* key, int64_t dflt) {
    auto p = params.find(key);
    return p == params.end() ? dflt : p->second;
  };

  if (name == "overhead") {
    in.ints["N"] = param("N", 60);
    in.ints["M"] = param("M", 40);
    std::vector<double> img(2048);
    for (auto& v : img) v = rand_real(s);
    in.global_reals["image"] = std::move(img);
  } else if (name == "fftlike" || name == "deriv") {
    in.ints["iters"] = param("iters", 40);
    in.ints["M"] = param("M", 60);
  } else if (name == "sphharm") {
    in.ints["L"] = param("L", 40);
    in.ints["M"] = param("M", 60);
  } else if (name == "linkedlist2" || name == "linkedlist3") {
    in.ints["inner_len"] = param("inner_len", 60);
    int64_t len = param("outer_len", 40);
    std::vector<double> data(static_cast<size_t>(len));
    for (auto& v : data) v = rand_real(s);
    in.lists["head"] = std::move(data);
  } else if (name == "listcalc") {
    in.ints["n"] = param("n", 8);
    in.ints["m"] = param("m", 16);
    int64_t len = param("n", 8);
    std::vector<double> data(static_cast<size_t>(len));
    for (auto& v : data) v = rand_real(s);
    in.lists["head"] = std::move(data);
  }
  return in;
}

}  // namespace pipeslice::workloads

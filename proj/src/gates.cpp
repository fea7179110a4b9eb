#include "ionreg/gates.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ionreg {
namespace {

constexpr double unitary_tol = 1e-9;

// Truncated-register convention: within one ion the 4 basis states are
// ordered (S=1,I=1),(S=1,I=0),(S=0,I=1),(S=0,I=0), i.e. qubit value 1 has
// the lower index. Gate payloads arrive in the computational basis (|0>,|1>)
// and are conjugated by X when moved into index order.
cmat to_index_basis(const cmat& value_basis) {
  cmat x(2, 2);
  x << 0, 1, 1, 0;
  return x * value_basis * x;
}

void check_u2(const cmat& u) {
  if (u.rows() != 2 || u.cols() != 2)
    throw std::invalid_argument("nuclear-qubit unitary must be 2x2");
  if (!is_unitary(u, unitary_tol))
    throw std::invalid_argument("nuclear-qubit payload is not unitary");
}

int ion_digit(int trunc_index, int ion, int n_ions) {
  int shift = 2 * (n_ions - 1 - ion);
  return (trunc_index >> shift) & 3;
}

std::vector<int> ion_slot_dims(int n_ions) {
  return std::vector<int>(static_cast<std::size_t>(n_ions), 4);
}

cmat embed_ion_op(const cmat& op4, int ion, int n_ions) {
  return embed(op4, ion, ion_slot_dims(n_ions));
}

cmat one_qubit_on_slot(const cmat& u_index, bool electron, int ion,
                       int n_ions) {
  cmat op4;
  if (electron)
    op4 = kron(u_index, cmat::Identity(2, 2));
  else
    op4 = kron(cmat::Identity(2, 2), u_index);
  return embed_ion_op(op4, ion, n_ions);
}

cmat cnot_nn_unitary(int control, int target, int n_ions) {
  int dim = truncated_dim(n_ions);
  cmat u = cmat::Zero(dim, dim);
  int target_flip = 1 << (2 * (n_ions - 1 - target));
  for (int col = 0; col < dim; ++col) {
    int dc = ion_digit(col, control, n_ions);
    bool control_one = (dc & 1) == 0; // nuclear bit of the control ion
    int row = control_one ? (col ^ target_flip) : col;
    u(row, col) = 1.0;
  }
  return u;
}

int require_int(std::istringstream& in, const std::string& line) {
  int v;
  if (!(in >> v))
    throw std::invalid_argument("bad circuit line: " + line);
  return v;
}

double require_double(std::istringstream& in, const std::string& line) {
  double v;
  if (!(in >> v))
    throw std::invalid_argument("bad circuit line: " + line);
  return v;
}

int parse_ion(std::istringstream& in, const std::string& line, int n_ions) {
  int v = require_int(in, line);
  if (v < 1 || v > n_ions)
    throw std::invalid_argument("ion index out of range (indices are 1-based): " +
                                line);
  return v - 1;
}

void require_end(std::istringstream& in, const std::string& line) {
  std::string extra;
  if (in >> extra)
    throw std::invalid_argument("trailing tokens on circuit line: " + line);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void validate_circuit(const Circuit& c) {
  if (c.n_ions < 1 || c.n_ions > 10)
    throw std::invalid_argument("circuit needs between 1 and 10 ions");
  for (const Gate& g : c.gates) {
    if (g.ion < 0 || g.ion >= c.n_ions)
      throw std::invalid_argument("gate ion index out of range");
    if (g.kind == GateKind::cnot_nn) {
      if (g.ion2 < 0 || g.ion2 >= c.n_ions)
        throw std::invalid_argument("gate ion index out of range");
      if (g.ion2 == g.ion)
        throw std::invalid_argument("two-ion gate needs distinct ions");
    }
    if (g.kind == GateKind::rot_s) {
      if (!std::isfinite(g.axis_phase_rad) || !std::isfinite(g.angle_rad))
        throw std::invalid_argument("rotation parameters must be finite");
    }
    if (g.kind == GateKind::u_nuclear)
      check_u2(g.u2);
  }
}

Circuit parse_circuit_text(const std::string& text, int n_ions) {
  Circuit c;
  c.n_ions = n_ions;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    std::istringstream in(line);
    std::string op;
    if (!(in >> op))
      continue;
    Gate g;
    if (op == "X" || op == "Z") {
      g.kind = op == "X" ? GateKind::x : GateKind::z;
      g.ion = parse_ion(in, line, n_ions);
    } else if (op == "ROTS") {
      g.kind = GateKind::rot_s;
      g.ion = parse_ion(in, line, n_ions);
      g.axis_phase_rad = require_double(in, line);
      g.angle_rad = require_double(in, line);
    } else if (op == "CNOTSI" || op == "CNOTIS" || op == "SWAPIS") {
      g.kind = op == "CNOTSI"   ? GateKind::cnot_si
               : op == "CNOTIS" ? GateKind::cnot_is
                                : GateKind::swap_is;
      g.ion = parse_ion(in, line, n_ions);
    } else if (op == "CNOT") {
      g.kind = GateKind::cnot_nn;
      g.ion = parse_ion(in, line, n_ions);
      g.ion2 = parse_ion(in, line, n_ions);
    } else if (op == "UN") {
      g.kind = GateKind::u_nuclear;
      g.ion = parse_ion(in, line, n_ions);
      g.u2 = cmat(2, 2);
      for (int r = 0; r < 2; ++r)
        for (int col = 0; col < 2; ++col) {
          double re = require_double(in, line);
          double im = require_double(in, line);
          g.u2(r, col) = cxd(re, im);
        }
      check_u2(g.u2);
    } else {
      throw std::invalid_argument("unknown circuit op: " + op);
    }
    require_end(in, line);
    c.gates.push_back(std::move(g));
  }
  validate_circuit(c);
  return c;
}

std::string circuit_to_text(const Circuit& c) {
  std::ostringstream out;
  for (const Gate& g : c.gates) {
    switch (g.kind) {
    case GateKind::x:
      out << "X " << g.ion + 1;
      break;
    case GateKind::z:
      out << "Z " << g.ion + 1;
      break;
    case GateKind::rot_s:
      out << "ROTS " << g.ion + 1 << ' ' << fmt(g.axis_phase_rad) << ' '
          << fmt(g.angle_rad);
      break;
    case GateKind::cnot_si:
      out << "CNOTSI " << g.ion + 1;
      break;
    case GateKind::cnot_is:
      out << "CNOTIS " << g.ion + 1;
      break;
    case GateKind::swap_is:
      out << "SWAPIS " << g.ion + 1;
      break;
    case GateKind::cnot_nn:
      out << "CNOT " << g.ion + 1 << ' ' << g.ion2 + 1;
      break;
    case GateKind::u_nuclear:
      out << "UN " << g.ion + 1;
      for (int r = 0; r < 2; ++r)
        for (int col = 0; col < 2; ++col)
          out << ' ' << fmt(g.u2(r, col).real()) << ' '
              << fmt(g.u2(r, col).imag());
      break;
    }
    out << '\n';
  }
  return out.str();
}

int truncated_dim(int n_ions) { return 1 << (2 * n_ions); }

int truncated_index(const std::vector<int>& electron_bits,
                    const std::vector<int>& nuclear_bits) {
  if (electron_bits.size() != nuclear_bits.size())
    throw std::invalid_argument("bit vectors differ in length");
  int idx = 0;
  for (std::size_t i = 0; i < electron_bits.size(); ++i)
    idx = 4 * idx + 2 * (1 - electron_bits[i]) + (1 - nuclear_bits[i]);
  return idx;
}

int truncated_to_full_index(int trunc_index, int n_ions, int nuclear_dim) {
  int full = 0;
  for (int ion = 0; ion < n_ions; ++ion) {
    int d = ion_digit(trunc_index, ion, n_ions);
    int s_idx = (d >> 1) & 1;
    int i_idx = (d & 1) == 0 ? 0 : nuclear_dim - 1;
    full = full * 2 * nuclear_dim + s_idx * nuclear_dim + i_idx;
  }
  return full;
}

cmat gate_unitary_truncated(const Gate& g, int n_ions) {
  cmat x(2, 2), z_idx(2, 2);
  x << 0, 1, 1, 0;
  z_idx << -1, 0, 0, 1;
  switch (g.kind) {
  case GateKind::x:
    return one_qubit_on_slot(x, false, g.ion, n_ions);
  case GateKind::z:
    return one_qubit_on_slot(z_idx, false, g.ion, n_ions);
  case GateKind::rot_s: {
    cmat sx(2, 2), sy(2, 2);
    sx << 0, 1, 1, 0;
    sy << 0, cxd(0, -1), cxd(0, 1), 0;
    cmat axis = std::cos(g.axis_phase_rad) * sx + std::sin(g.axis_phase_rad) * sy;
    cmat u_val = std::cos(g.angle_rad / 2) * cmat::Identity(2, 2) -
                 cxd(0, 1) * std::sin(g.angle_rad / 2) * axis;
    return one_qubit_on_slot(to_index_basis(u_val), true, g.ion, n_ions);
  }
  case GateKind::cnot_si: {
    cmat op4 = cmat::Identity(4, 4);
    op4(0, 0) = op4(1, 1) = 0;
    op4(0, 1) = op4(1, 0) = 1;
    return embed_ion_op(op4, g.ion, n_ions);
  }
  case GateKind::cnot_is: {
    cmat op4 = cmat::Identity(4, 4);
    op4(0, 0) = op4(2, 2) = 0;
    op4(0, 2) = op4(2, 0) = 1;
    return embed_ion_op(op4, g.ion, n_ions);
  }
  case GateKind::swap_is: {
    cmat op4 = cmat::Identity(4, 4);
    op4(1, 1) = op4(2, 2) = 0;
    op4(1, 2) = op4(2, 1) = 1;
    return embed_ion_op(op4, g.ion, n_ions);
  }
  case GateKind::cnot_nn:
    return cnot_nn_unitary(g.ion, g.ion2, n_ions);
  case GateKind::u_nuclear:
    return one_qubit_on_slot(to_index_basis(g.u2), false, g.ion, n_ions);
  }
  throw std::logic_error("unhandled gate kind");
}

cmat circuit_target_unitary(const Circuit& c) {
  validate_circuit(c);
  int dim = truncated_dim(c.n_ions);
  cmat u = cmat::Identity(dim, dim);
  for (const Gate& g : c.gates)
    u = gate_unitary_truncated(g, c.n_ions) * u;
  return u;
}

} // namespace ionreg

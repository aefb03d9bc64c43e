#include "nlwave/mesh.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "json.hpp"

namespace nlw {

Grid::Grid(int n, int dims) : n_(n), dims_(dims) {
  if (n != 2 && n != 3) throw config_error("mesh", "dimension must be 2 or 3, got " + std::to_string(n));
  if (dims < 4) throw config_error("mesh", "dims must be >= 4, got " + std::to_string(dims));
  h_ = 1.0 / (dims - 1);
  size_ = 1;
  for (int a = 0; a < 3; ++a) {
    stride_[a] = (a < n) ? size_ : 0;
    if (a < n) size_ *= dims;
  }

  interior_of_.assign(static_cast<size_t>(size_), -1);
  boundary_of_.assign(static_cast<size_t>(size_), -1);
  weights_.resize(size_);
  for (Index i = 0; i < size_; ++i) {
    const auto p = multi(i);
    bool bnd = false;
    double w = 1.0;
    for (int a = 0; a < n; ++a) {
      const bool edge = (p[a] == 0 || p[a] == dims - 1);
      bnd = bnd || edge;
      w *= edge ? 0.5 * h_ : h_;
    }
    weights_[i] = w;
    if (bnd) {
      boundary_of_[static_cast<size_t>(i)] = static_cast<Index>(boundary_.size());
      boundary_.push_back(i);
    } else {
      interior_of_[static_cast<size_t>(i)] = static_cast<Index>(interior_.size());
      interior_.push_back(i);
    }
  }

  for (int a = 0; a < n; ++a) {
    for (int side = 0; side < 2; ++side) {
      Face f{a, side, {}, {}};
      std::vector<double> w;
      for (Index i = 0; i < size_; ++i) {
        const auto p = multi(i);
        if (p[a] != (side == 0 ? 0 : dims - 1)) continue;
        double wi = 1.0;
        for (int b = 0; b < n; ++b) {
          if (b == a) continue;
          wi *= (p[b] == 0 || p[b] == dims - 1) ? 0.5 * h_ : h_;
        }
        f.nodes.push_back(i);
        w.push_back(wi);
      }
      f.weights = Eigen::Map<Vec<double>>(w.data(), static_cast<Index>(w.size()));
      faces_.push_back(std::move(f));
    }
  }
  std::vector<double> ew;
  for (size_t fi = 0; fi < faces_.size(); ++fi) {
    for (size_t k = 0; k < faces_[fi].nodes.size(); ++k) {
      entries_.push_back({static_cast<int>(fi), faces_[fi].nodes[k]});
      ew.push_back(faces_[fi].weights[static_cast<Index>(k)]);
    }
  }
  entry_weights_ = Eigen::Map<Vec<double>>(ew.data(), static_cast<Index>(ew.size()));
}

std::array<int, 3> Grid::multi(Index node) const {
  std::array<int, 3> p{0, 0, 0};
  for (int a = 0; a < n_; ++a) {
    p[a] = static_cast<int>(node % dims_);
    node /= dims_;
  }
  return p;
}

Index Grid::index(const std::array<int, 3>& ijk) const {
  Index i = 0;
  for (int a = 0; a < n_; ++a) i += ijk[a] * stride_[a];
  return i;
}

Point Grid::point(Index node) const {
  const auto p = multi(node);
  return Point(p[0] * h_, p[1] * h_, n_ == 3 ? p[2] * h_ : 0.0);
}

Grid make_grid(int n, int dims) { return Grid(n, dims); }

Eigen::SparseMatrix<double> stiffness_matrix(const Grid& g, const Vec<double>& gamma) {
  std::vector<Eigen::Triplet<double>> trip;
  const double ih2 = 1.0 / (g.h() * g.h());
  for (Index i : g.interior_nodes()) {
    double diag = 0.0;
    for (int a = 0; a < g.n(); ++a) {
      const Index st = g.stride(a);
      const double gp = midpoint(gamma, i, st) * ih2;
      const double gm = midpoint(gamma, i - st, st) * ih2;
      trip.emplace_back(i, i + st, -gp);
      trip.emplace_back(i, i - st, -gm);
      diag += gp + gm;
    }
    trip.emplace_back(i, i, diag);
  }
  Eigen::SparseMatrix<double> k(g.size(), g.size());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

StiffnessBlocks stiffness_blocks(const Grid& g, const Vec<double>& gamma) {
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  std::vector<Eigen::Triplet<double>> ii, ib;
  for (Index col = 0; col < k.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(k, col); it; ++it) {
      const Index r = g.interior_index(it.row());
      if (r < 0) continue;
      const Index c = g.interior_index(it.col());
      if (c >= 0)
        ii.emplace_back(r, c, it.value());
      else
        ib.emplace_back(r, g.boundary_index(it.col()), it.value());
    }
  }
  const auto ni = static_cast<Index>(g.interior_nodes().size());
  const auto nb = static_cast<Index>(g.boundary_nodes().size());
  StiffnessBlocks out{Eigen::SparseMatrix<double>(ni, ni), Eigen::SparseMatrix<double>(ni, nb)};
  out.ii.setFromTriplets(ii.begin(), ii.end());
  out.ib.setFromTriplets(ib.begin(), ib.end());
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");

void write_header(const std::string& stem, const Grid& g, bool is_complex, const std::string& role) {
  nlohmann::json j{{"n", g.n()}, {"dims", g.dims()}, {"h", g.h()}, {"complex", is_complex}, {"role", role}};
  std::ofstream(stem + ".json") << j.dump(2) << "\n";
}

}  // namespace

void write_snapshot(const std::string& stem, const Grid& g, const Vec<double>& u, const std::string& role) {
  write_header(stem, g, false, role);
  std::ofstream bin(stem + ".bin", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
}

void write_snapshot(const std::string& stem, const Grid& g, const Vec<cplx>& u, const std::string& role) {
  write_header(stem, g, true, role);
  std::ofstream bin(stem + ".bin", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(cplx)));
}

Snapshot read_snapshot(const std::string& stem) {
  std::ifstream hdr(stem + ".json");
  if (!hdr) throw config_error("mesh", "missing snapshot header " + stem + ".json");
  const auto j = nlohmann::json::parse(hdr);
  Snapshot s;
  s.n = j.at("n");
  s.dims = j.at("dims");
  s.h = j.at("h");
  s.complex = j.at("complex");
  s.role = j.value("role", "");
  Index count = 1;
  for (int a = 0; a < s.n; ++a) count *= s.dims;
  std::ifstream bin(stem + ".bin", std::ios::binary);
  std::vector<double> raw(static_cast<size_t>(count * (s.complex ? 2 : 1)));
  bin.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(double)));
  if (!bin) throw config_error("mesh", "truncated snapshot " + stem + ".bin");
  s.values.resize(count);
  for (Index i = 0; i < count; ++i)
    s.values[i] = s.complex ? cplx(raw[2 * i], raw[2 * i + 1]) : cplx(raw[i], 0.0);
  return s;
}

}  // namespace nlw

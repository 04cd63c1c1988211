// SPDX-License-Identifier: Apache-2.0

#include "argcd/ci.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "argcd/special_functions.hpp"

namespace argcd {

std::int64_t ContingencyTable::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ContingencyTable contingency_counts(const Dataset& d, Node x, Node y, const NodeSet& z,
                                    std::int64_t cell_cap) {
  const int n = d.num_vars();
  auto in_range = [n](Node v) { return v >= 0 && v < n; };
  if (!in_range(x) || !in_range(y) || x == y) throw CiError("invalid test endpoints");
  NodeSet zs = make_node_set(z);
  for (Node v : zs) {
    if (!in_range(v) || v == x || v == y) throw CiError("invalid conditioning variable " + std::to_string(v));
  }

  ContingencyTable t;
  t.rx = d.cardinality(x);
  t.ry = d.cardinality(y);
  std::int64_t cells = static_cast<std::int64_t>(t.rx) * t.ry;
  std::vector<std::int64_t> radix;
  for (Node v : zs) {
    radix.push_back(t.nz);
    t.nz *= d.cardinality(v);
    if (cells * t.nz > cell_cap) throw CiError("conditioning set too large");
  }
  t.counts.assign(static_cast<std::size_t>(cells * t.nz), 0);

  auto xs = d.column(x);
  auto ys = d.column(y);
  std::vector<std::span<const int>> zcols;
  for (Node v : zs) zcols.push_back(d.column(v));
  for (std::size_t r = 0; r < d.num_rows(); ++r) {
    std::int64_t zc = 0;
    for (std::size_t k = 0; k < zcols.size(); ++k) zc += zcols[k][r] * radix[k];
    ++t.counts[static_cast<std::size_t>((zc * t.rx + xs[r]) * t.ry + ys[r])];
  }
  return t;
}

G2Result g2_statistic(const ContingencyTable& t) {
  if (t.counts.empty()) throw CiError("empty contingency table");
  G2Result out;
  out.dof = static_cast<std::int64_t>(t.rx - 1) * (t.ry - 1) * t.nz;
  std::vector<std::int64_t> row(t.rx), col(t.ry);
  double sum = 0.0;
  for (std::int64_t zc = 0; zc < t.nz; ++zc) {
    std::fill(row.begin(), row.end(), 0);
    std::fill(col.begin(), col.end(), 0);
    std::int64_t slice = 0;
    for (int xi = 0; xi < t.rx; ++xi) {
      for (int yi = 0; yi < t.ry; ++yi) {
        auto o = t.at(xi, yi, zc);
        row[xi] += o;
        col[yi] += o;
        slice += o;
      }
    }
    if (slice == 0) continue;
    for (int xi = 0; xi < t.rx; ++xi) {
      for (int yi = 0; yi < t.ry; ++yi) {
        auto o = t.at(xi, yi, zc);
        if (o == 0) continue;
        sum += static_cast<double>(o) *
               std::log(static_cast<double>(o) * static_cast<double>(slice) /
                        (static_cast<double>(row[xi]) * static_cast<double>(col[yi])));
      }
    }
  }
  // Rounding can leave a tiny negative value for perfectly proportional tables.
  out.g2 = std::max(0.0, 2.0 * sum);
  return out;
}

double chi_square_survival(double stat, std::int64_t dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_survival: dof must be positive");
  if (!(stat >= 0.0)) throw std::invalid_argument("chi_square_survival: statistic must be >= 0");
  return gamma_q(static_cast<double>(dof) / 2.0, stat / 2.0);
}

void canonicalize(CiStatement& s) {
  if (s.x > s.y) std::swap(s.x, s.y);
  s.z = make_node_set(std::move(s.z));
}

double credibility(const CiStatement& s, double alpha) {
  if (!s.reliable) return 0.0;
  double w = s.independent ? (s.p_value - alpha) / (1.0 - alpha) : (alpha - s.p_value) / alpha;
  return std::clamp(w, 0.0, 1.0);
}

CiStatement ci_test(const Dataset& d, Node x, Node y, const NodeSet& z, const CiOptions& options) {
  CiStatement s;
  s.x = x;
  s.y = y;
  s.z = z;
  canonicalize(s);
  auto table = contingency_counts(d, s.x, s.y, s.z, options.cell_cap);
  auto g2 = g2_statistic(table);
  s.g2 = g2.g2;
  s.dof = g2.dof;
  s.p_value = chi_square_survival(g2.g2, g2.dof);
  if (options.min_samples_per_dof > 0 &&
      static_cast<double>(d.num_rows()) < static_cast<double>(options.min_samples_per_dof) * g2.dof) {
    s.reliable = false;
    s.independent = false;
  } else {
    s.independent = s.p_value > options.alpha;
  }
  s.credibility = credibility(s, options.alpha);
  return s;
}

CiStatement DataCiTester::test(Node x, Node y, const NodeSet& z) const {
  return ci_test(data_, x, y, z, options_);
}

CiStatement OracleCiTester::test(Node x, Node y, const NodeSet& z) const {
  CiStatement s;
  s.x = x;
  s.y = y;
  s.z = z;
  canonicalize(s);
  s.independent = d_separated(truth_, s.x, s.y, s.z);
  s.p_value = s.independent ? 1.0 : 0.0;
  s.g2 = 0.0;
  s.dof = 1;
  s.credibility = credibility(s, alpha_);
  return s;
}

}  // namespace argcd

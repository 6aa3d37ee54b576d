#include "flownet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "flownet/simplex.hpp"

namespace flownet {
namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  // returns false when a and b were already connected
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

void reach_directed(const NetworkGraph& g, int start, bool reversed,
                    std::vector<char>& seen) {
  std::vector<int> stack{start};
  seen.assign(g.n, 0);
  seen[start] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const Edge& e : g.edges) {
      const int from = reversed ? e.head : e.tail;
      const int to = reversed ? e.tail : e.head;
      if (from == v && !seen[to]) {
        seen[to] = 1;
        stack.push_back(to);
      }
    }
  }
}

}  // namespace

NetworkGraph build_graph(int n, const std::vector<Edge>& edges,
                         const std::vector<Terminal>& terminals) {
  if (n < 1) throw ConfigError("graph needs at least one vertex");
  NetworkGraph g;
  g.n = n;
  g.m = static_cast<int>(edges.size());
  g.edges = edges;
  g.terminals = terminals;
  g.B_int = IntMat::Zero(n, g.m);
  for (int j = 0; j < g.m; ++j) {
    const Edge& e = edges[j];
    if (e.tail < 0 || e.tail >= n || e.head < 0 || e.head >= n) {
      std::ostringstream msg;
      msg << "edge " << (j + 1) << " references a vertex outside 1.." << n;
      throw ConfigError(msg.str());
    }
    if (e.tail == e.head) {
      std::ostringstream msg;
      msg << "edge " << (j + 1) << " is a self-loop at vertex " << (e.tail + 1);
      throw ConfigError(msg.str());
    }
    g.B_int(e.tail, j) = -1;
    g.B_int(e.head, j) = +1;
  }
  g.B = g.B_int.cast<double>();
  const int k = static_cast<int>(terminals.size());
  g.E = Mat::Zero(n, k);
  for (int c = 0; c < k; ++c) {
    const Terminal& t = terminals[c];
    if (t.vertex < 0 || t.vertex >= n) {
      throw ConfigError("terminal references a vertex outside the graph");
    }
    if (t.sign != +1 && t.sign != -1) {
      throw ConfigError("terminal sign must be +1 or -1");
    }
    g.E(t.vertex, c) = t.sign;
  }
  return g;
}

int incidence_rank(const NetworkGraph& g) {
  // Fraction-free elimination; pivots stay +-1 for incidence matrices.
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> a =
      g.B_int.cast<long long>();
  const int rows = g.n, cols = g.m;
  int rank = 0;
  long long prev = 1;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r) {
      if (a(r, col) != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) continue;
    a.row(pivot).swap(a.row(rank));
    for (int r = rank + 1; r < rows; ++r) {
      for (int c = col + 1; c < cols; ++c) {
        a(r, c) = (a(r, c) * a(rank, col) - a(r, col) * a(rank, c)) / prev;
      }
      a(r, col) = 0;
    }
    prev = a(rank, col);
    ++rank;
  }
  return rank;
}

int component_count_unionfind(const NetworkGraph& g) {
  UnionFind uf(g.n);
  int components = g.n;
  for (const Edge& e : g.edges) {
    if (uf.unite(e.tail, e.head)) --components;
  }
  return components;
}

Connectivity connectivity(const NetworkGraph& g) {
  Connectivity c;
  c.component_count = component_count_unionfind(g);
  c.weakly_connected = (c.component_count == 1);

  // dim ker B^T = n - rank B must give the same count.
  if (g.n - incidence_rank(g) != c.component_count) {
    throw NumericalError("component count mismatch between rank and traversal");
  }

  c.strongly_connected = true;
  if (g.n > 1) {
    std::vector<char> seen;
    reach_directed(g, 0, false, seen);
    for (char s : seen) c.strongly_connected = c.strongly_connected && s;
    if (c.strongly_connected) {
      reach_directed(g, 0, true, seen);
      for (char s : seen) c.strongly_connected = c.strongly_connected && s;
    }
  }
  return c;
}

bool is_balanced(const NetworkGraph& g) {
  for (int i = 0; i < g.n; ++i) {
    if (g.B_int.row(i).sum() != 0) return false;
  }
  return true;
}

bool is_acyclic(const NetworkGraph& g) { return incidence_rank(g) == g.m; }

BoxBounds BoxBounds::unbounded(int m) {
  BoxBounds b;
  b.lower = Vec::Constant(m, -kInf);
  b.upper = Vec::Constant(m, kInf);
  return b;
}

void BoxBounds::validate() const {
  if (lower.size() != upper.size()) {
    throw ConfigError("flow bounds lower/upper length mismatch");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      std::ostringstream msg;
      msg << "flow bound on edge " << (i + 1) << " has lower > upper";
      throw ConfigError(msg.str());
    }
  }
}

InteriorPointResult interior_point_condition(const NetworkGraph& g,
                                             const BoxBounds& bounds,
                                             const InteriorPointOptions& opts) {
  bounds.validate();
  if (bounds.lower.size() != g.m) {
    throw ConfigError("flow bounds length differs from edge count");
  }
  InteriorPointResult res;

  double max_finite = 0.0;
  for (int i = 0; i < g.m; ++i) {
    if (std::isfinite(bounds.lower[i])) max_finite = std::max(max_finite, std::abs(bounds.lower[i]));
    if (std::isfinite(bounds.upper[i])) max_finite = std::max(max_finite, std::abs(bounds.upper[i]));
  }
  res.cap = 1e6 * std::max(1.0, max_finite);
  Vec lb = bounds.lower.cwiseMax(-res.cap);
  Vec ub = bounds.upper.cwiseMin(res.cap);

  if (g.m == 0) {
    res.holds = (g.n <= 1);
    res.witness = Vec(0);
    res.margin = opts.interior_tol;
    if (!res.holds) res.diagnostic = "no edges: subgraph cannot connect the vertices";
    return res;
  }

  // ker B cap box feasibility first, so an empty set gets a clear message.
  {
    LpProblem feas;
    feas.A = g.B;
    feas.b = Vec::Zero(g.n);
    feas.c = Vec::Zero(g.m);
    feas.lb = lb;
    feas.ub = ub;
    if (solve_lp(feas).status != LpStatus::Optimal) {
      res.holds = false;
      res.diagnostic = "ker B does not intersect the flow box";
      return res;
    }
  }

  // Per candidate edge: maximize s subject to lb_i + s <= z_i <= ub_i - s.
  // Variables (z, s, u1, u2) with the margin rows turned into equalities.
  std::vector<int> admissible;
  std::vector<Vec> witnesses;
  for (int i = 0; i < g.m; ++i) {
    LpProblem p;
    const int nv = g.m + 3;
    p.A = Mat::Zero(g.n + 2, nv);
    p.A.block(0, 0, g.n, g.m) = g.B;
    p.b = Vec::Zero(g.n + 2);
    p.A(g.n, i) = 1.0;
    p.A(g.n, g.m) = -1.0;
    p.A(g.n, g.m + 1) = -1.0;
    p.b[g.n] = lb[i];
    p.A(g.n + 1, i) = 1.0;
    p.A(g.n + 1, g.m) = 1.0;
    p.A(g.n + 1, g.m + 2) = 1.0;
    p.b[g.n + 1] = ub[i];
    p.c = Vec::Zero(nv);
    p.c[g.m] = -1.0;  // max s
    p.lb = Vec::Zero(nv);
    p.ub = Vec::Constant(nv, 3.0 * res.cap);
    p.lb.head(g.m) = lb;
    p.ub.head(g.m) = ub;
    const LpSolution sol = solve_lp(p);
    if (sol.status == LpStatus::Optimal && sol.x[g.m] > opts.interior_tol) {
      admissible.push_back(i);
      witnesses.push_back(sol.x.head(g.m));
    }
  }

  if (admissible.empty()) {
    res.holds = (g.n <= 1);
    res.margin = opts.interior_tol;
    if (!res.holds) {
      res.diagnostic = "no edge admits a strictly interior circulation";
    }
    return res;
  }

  Vec z = Vec::Zero(g.m);
  for (const Vec& w : witnesses) z += w;
  z /= static_cast<double>(witnesses.size());
  // Project back onto ker B; averaging keeps strict interiority, this just
  // removes accumulated simplex roundoff.
  z -= g.B.transpose() *
       (g.B * g.B.transpose()).completeOrthogonalDecomposition().solve(g.B * z);

  double min_margin = kInf;
  for (int i : admissible) {
    min_margin = std::min(min_margin, std::min(z[i] - lb[i], ub[i] - z[i]));
  }
  res.margin = 0.5 * min_margin;
  for (int i = 0; i < g.m; ++i) {
    if (z[i] > lb[i] + res.margin && z[i] < ub[i] - res.margin) {
      res.active_subgraph_edges.push_back(i);
    }
  }
  res.witness = z;

  UnionFind uf(g.n);
  std::vector<char> touched(g.n, 0);
  for (int i : res.active_subgraph_edges) {
    uf.unite(g.edges[i].tail, g.edges[i].head);
    touched[g.edges[i].tail] = 1;
    touched[g.edges[i].head] = 1;
  }
  int root = -1;
  bool connected = true;
  for (int v = 0; v < g.n; ++v) {
    if (!opts.isolated_vertices_fail && !touched[v]) continue;
    if (root < 0) {
      root = uf.find(v);
    } else if (uf.find(v) != root) {
      connected = false;
      break;
    }
  }
  if (root < 0) connected = (g.n <= 1);
  res.holds = connected;
  if (!res.holds) {
    res.diagnostic = "interior-edge subgraph is not weakly connected on the vertex set";
  }
  return res;
}

}  // namespace flownet

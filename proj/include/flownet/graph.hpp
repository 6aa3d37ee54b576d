#ifndef FLOWNET_GRAPH_HPP
#define FLOWNET_GRAPH_HPP

#include <optional>
#include <string>
#include <vector>

#include "flownet/types.hpp"

namespace flownet {

struct Edge {
  int tail = 0;
  int head = 0;
};

/// One terminal column of E: a vertex where flow enters (+1) or leaves (-1).
struct Terminal {
  int vertex = 0;
  int sign = +1;
};

/// Directed graph held as an incidence matrix. Column j of B has -1 at the
/// tail of edge j and +1 at its head, so every column sums to zero.
struct NetworkGraph {
  int n = 0;  // vertices
  int m = 0;  // edges
  std::vector<Edge> edges;
  std::vector<Terminal> terminals;
  IntMat B_int;  // n x m, exact
  Mat B;         // same, as double for algebra
  Mat E;         // n x k terminal matrix

  int terminal_count() const { return static_cast<int>(terminals.size()); }
};

/// Assembles B and E from an edge list. Vertex indices are 0-based here;
/// the scenario file layer converts from the 1-based convention.
/// Throws ConfigError on self-loops or out-of-range indices.
NetworkGraph build_graph(int n, const std::vector<Edge>& edges,
                         const std::vector<Terminal>& terminals = {});

struct Connectivity {
  bool weakly_connected = false;
  bool strongly_connected = false;
  int component_count = 0;
};

/// Weak/strong connectivity and the number of weakly connected components.
/// component_count equals dim ker B^T; computed by union-find and checked
/// against n - rank(B) (the two must agree, rank is exact for incidence
/// matrices).
Connectivity connectivity(const NetworkGraph& g);

/// In-degree equals out-degree at every vertex, equivalently B*1 = 0.
bool is_balanced(const NetworkGraph& g);

/// ker B = 0, equivalently rank B = m, equivalently no undirected cycles
/// (parallel and anti-parallel edge pairs count as cycles).
bool is_acyclic(const NetworkGraph& g);

/// Exact rank of B over the rationals. Incidence matrices are totally
/// unimodular, so integer elimination never grows entries.
int incidence_rank(const NetworkGraph& g);

/// Number of weakly connected components by undirected union-find.
int component_count_unionfind(const NetworkGraph& g);

/// Per-edge flow box [lower, upper]; entries may be +-infinity.
struct BoxBounds {
  Vec lower;
  Vec upper;

  static BoxBounds unbounded(int m);
  void validate() const;  // throws ConfigError unless lower <= upper
};

struct InteriorPointOptions {
  double interior_tol = 1e-9;  // margin below which an edge is not interior
  // Vertices not touched by any interior edge make the condition fail
  // (the subgraph G0 keeps the full vertex set). Set false to test
  // connectivity only on vertices incident to interior edges.
  bool isolated_vertices_fail = true;
};

struct InteriorPointResult {
  bool holds = false;
  std::optional<Vec> witness;           // z in ker B inside the box
  std::vector<int> active_subgraph_edges;  // strictly interior at `witness`
  double margin = 0.0;    // interiority margin defining the active set
  double cap = 0.0;       // finite stand-in used for infinite bounds
  std::string diagnostic;
};

/// Decides the interior point condition: does some circulation z in
/// ker B with bounds.lower <= z <= bounds.upper exist whose strictly
/// interior edges span a weakly connected subgraph on all vertices?
/// Per-edge interiority is decided by a margin-maximizing LP; witnesses
/// are averaged so the result is strictly interior on every edge that
/// admits it.
InteriorPointResult interior_point_condition(
    const NetworkGraph& g, const BoxBounds& bounds,
    const InteriorPointOptions& opts = {});

}  // namespace flownet

#endif

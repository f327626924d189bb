#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridfs::harness {

enum class Shape { MasterSlaves, Hierarchical, CompleteGraph };

const char* shape_name(Shape s) noexcept;
// "master" / "ms", "hier" / "hierarchical", "complete" / "graph".
Shape parse_shape(std::string_view text);

// Node indices by role. In COMPLETE_GRAPH every node works and serves files;
// node 0 also distributes. A one-node MASTER_SLAVES plan lets the master
// work for itself.
struct TopologyPlan {
  Shape shape{Shape::MasterSlaves};
  std::size_t nodes{1};
  std::size_t distributor{0};
  std::vector<std::size_t> workers;
  std::optional<std::size_t> collector;

  // Throws InvalidArgument (HIERARCHICAL needs at least 3 nodes).
  static TopologyPlan make(Shape shape, std::size_t nodes);
  std::string describe() const;
};

}  // namespace gridfs::harness

#include "gridfs/harness/topology.hpp"

#include <fmt/format.h>

#include "gridfs/error.hpp"

namespace gridfs::harness {

const char* shape_name(Shape s) noexcept {
  switch (s) {
    case Shape::MasterSlaves: return "master-slaves";
    case Shape::Hierarchical: return "hierarchical";
    case Shape::CompleteGraph: return "complete-graph";
  }
  return "?";
}

Shape parse_shape(std::string_view t) {
  if (t == "master" || t == "ms" || t == "master-slaves") return Shape::MasterSlaves;
  if (t == "hier" || t == "hierarchical") return Shape::Hierarchical;
  if (t == "complete" || t == "graph" || t == "complete-graph") return Shape::CompleteGraph;
  throw Error(Errc::InvalidArgument, "unknown topology '" + std::string(t) + "'");
}

TopologyPlan TopologyPlan::make(Shape shape, std::size_t nodes) {
  if (nodes == 0) throw Error(Errc::InvalidArgument, "a cluster needs at least one node");
  TopologyPlan p;
  p.shape = shape;
  p.nodes = nodes;
  switch (shape) {
    case Shape::MasterSlaves:
      for (std::size_t i = 1; i < nodes; ++i) p.workers.push_back(i);
      if (p.workers.empty()) p.workers.push_back(0);
      break;
    case Shape::Hierarchical:
      if (nodes < 3) {
        throw Error(Errc::InvalidArgument, "hierarchical needs distributor, worker and collector");
      }
      for (std::size_t i = 1; i + 1 < nodes; ++i) p.workers.push_back(i);
      p.collector = nodes - 1;
      break;
    case Shape::CompleteGraph:
      for (std::size_t i = 0; i < nodes; ++i) p.workers.push_back(i);
      break;
  }
  return p;
}

std::string TopologyPlan::describe() const {
  std::string w;
  for (auto i : workers) w += (w.empty() ? "" : ",") + std::to_string(i);
  return fmt::format("{} x{}: distributor {}, workers [{}]{}", shape_name(shape), nodes,
                     distributor, w,
                     collector ? fmt::format(", collector {}", *collector) : std::string());
}

}  // namespace gridfs::harness

#ifndef MRABGCN_GRAPH_IO_HPP
#define MRABGCN_GRAPH_IO_HPP

#include "mrabgcn/graphs.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mrabgcn {

/// One id per line; blank lines ignored. Duplicate ids are rejected.
std::vector<std::string> read_ids(const std::filesystem::path& path);
void write_ids(const std::filesystem::path& path, const std::vector<std::string>& ids);

/// `from,to,distance` table. Ids index into `ids` (dense indices by their
/// order there). Unlisted pairs are +infinity; the diagonal is 0.
Matrix read_distances(const std::filesystem::path& path, const std::vector<std::string>& ids);
Matrix parse_distances(std::istream& in, const std::vector<std::string>& ids, const std::string& source = "<stream>");
/// Writes every finite off-diagonal entry.
void write_distances(const std::filesystem::path& path, const Matrix& distances, const std::vector<std::string>& ids);

/// Plain-text dump of the node graph (adjacency, edge list, degrees,
/// incidence) and the edge graph adjacency. Numbers use %.17g so the dump
/// round-trips exactly.
void write_graph_dump(std::ostream& out, const NodeGraph& g, const EdgeGraph& eg,
                      const std::vector<std::string>& ids = {});

/// %.17g
std::string format_double(double value);

} // namespace mrabgcn

#endif // MRABGCN_GRAPH_IO_HPP

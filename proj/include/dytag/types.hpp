#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace dytag {

using NodeId = std::uint32_t;
using LabelId = std::uint32_t;
using TextId = std::uint32_t;
using EdgeIndex = std::size_t;
/// Dataset time units are passed through opaquely.
using Timestamp = double;

/// Neighbor-set convention. Undirected unions out- and in-counterparts.
enum class Direction { undirected, directed };

/// The numeric structural metrics agents reason about.
enum class Metric { hi, cn, dnf };

std::string_view metric_key(Metric m);              // "HI", "CN", "DNF"
std::string_view metric_display_name(Metric m);     // "Historical Interaction" ...
std::optional<Metric> parse_metric(std::string_view s);

}  // namespace dytag

#pragma once

#include <string>

#include "alignmap/cartography.hpp"

namespace alignmap {

/// Self-contained SVG scatter of the map: x = variability, y = quality,
/// one color per region, legend limited to regions that are present.
std::string render_scatter_svg(const DataMap& map);

/// Three hexbin panels (one per region) on a shared coordinate range.
/// Every point lands in exactly one hexagon; bins carry data-count and
/// data-region attributes so counts are machine-checkable.
std::string render_hexbin_svg(const DataMap& map);

const char* region_color(Region r);

}  // namespace alignmap

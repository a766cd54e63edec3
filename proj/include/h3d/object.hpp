#pragma once

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

namespace h3d {

/// Object footprint at lenslet resolution on a canvas that may extend past the frame.
/// Cell (i, j) of the mask corresponds to lenslet (origin_i + i, origin_j + j); the frame is
/// lenslets [0, frame_cols) x [0, frame_rows).
struct ObjectMask {
    int origin_i = 0;
    int origin_j = 0;
    int width = 0;
    int height = 0;
    int frame_cols = 0;
    int frame_rows = 0;
    std::vector<std::uint8_t> cells;

    bool at(int i, int j) const { return cells[static_cast<std::size_t>(j) * width + i] != 0; }
    void set(int i, int j, bool on) { cells[static_cast<std::size_t>(j) * width + i] = on ? 1 : 0; }
};

/// Axis-aligned object bounding box in sensor pixels (may extend outside the frame).
struct ObjectBox {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

using ObjectInfo = std::variant<ObjectMask, ObjectBox>;

}  // namespace h3d

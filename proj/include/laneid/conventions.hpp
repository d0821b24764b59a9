#pragma once

#include <cstddef>
#include <stdexcept>
#include <string_view>

namespace laneid {

/// Maximum number of lanes, and so the class count of every head.
inline constexpr int kMaxLanes = 8;

enum class Convention { Left, Right };

std::string_view to_string(Convention c);

class LabelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ground truth for one frame: lane ID counted from the left border, from the
/// right border, and the lane count. IDs are 1-based.
struct LaneLabel {
    int delta_l = 1;
    int delta_r = 1;
    int lane_count = 1;

    /// Label for the ego lane `delta_l` on a road with `lane_count` lanes.
    static LaneLabel from_left(int delta_l, int lane_count);

    bool valid() const noexcept;
    /// Throws LabelError describing the first violated constraint.
    void validate() const;

    int id(Convention c) const noexcept { return c == Convention::Left ? delta_l : delta_r; }

    bool operator==(const LaneLabel&) const = default;
};

/// lane_count - delta_l + 1. Throws LabelError outside 1 <= delta_l <= lane_count <= 8.
int right_from_left(int delta_l, int lane_count);

/// Swaps the two conventions; what a horizontally flipped camera would see.
LaneLabel mirror(const LaneLabel& label);

/// s_r - s_c + s_l - 1; zero exactly for a consistent triple.
double triangular_residual(double s_l, double s_r, double s_c);

/// 1-based ID <-> 0-based class index.
std::size_t class_index(int id);
int id_from_class(std::size_t index);

} // namespace laneid

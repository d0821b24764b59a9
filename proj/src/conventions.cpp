#include "laneid/conventions.hpp"

#include <string>

namespace laneid {

std::string_view to_string(Convention c) { return c == Convention::Left ? "left" : "right"; }

int right_from_left(int delta_l, int lane_count) {
    if (lane_count < 1 || lane_count > kMaxLanes) {
        throw LabelError("lane count " + std::to_string(lane_count) + " outside 1.." + std::to_string(kMaxLanes));
    }
    if (delta_l < 1 || delta_l > lane_count) {
        throw LabelError("left lane ID " + std::to_string(delta_l) + " outside 1.." + std::to_string(lane_count));
    }
    return lane_count - delta_l + 1;
}

LaneLabel LaneLabel::from_left(int delta_l, int lane_count) {
    return {delta_l, right_from_left(delta_l, lane_count), lane_count};
}

bool LaneLabel::valid() const noexcept {
    return lane_count >= 1 && lane_count <= kMaxLanes && delta_l >= 1 && delta_l <= lane_count && delta_r >= 1 &&
           delta_r <= lane_count && delta_r == lane_count - delta_l + 1;
}

void LaneLabel::validate() const {
    const int expected = right_from_left(delta_l, lane_count);
    if (delta_r != expected) {
        throw LabelError("right lane ID " + std::to_string(delta_r) + " inconsistent with left ID " +
                         std::to_string(delta_l) + " and lane count " + std::to_string(lane_count) + " (expected " +
                         std::to_string(expected) + ")");
    }
}

LaneLabel mirror(const LaneLabel& label) { return {label.delta_r, label.delta_l, label.lane_count}; }

double triangular_residual(double s_l, double s_r, double s_c) { return s_r - s_c + s_l - 1.0; }

std::size_t class_index(int id) {
    if (id < 1 || id > kMaxLanes) throw LabelError("lane ID " + std::to_string(id) + " has no class index");
    return static_cast<std::size_t>(id - 1);
}

int id_from_class(std::size_t index) {
    if (index >= static_cast<std::size_t>(kMaxLanes)) {
        throw LabelError("class index " + std::to_string(index) + " out of range");
    }
    return static_cast<int>(index) + 1;
}

} // namespace laneid

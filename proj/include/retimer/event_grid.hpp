#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retimer/errors.hpp"

namespace retimer {

enum class GridKind { binary, integer };

// Discrete event tensor with shape [T, C, H, W]. Values are non-negative
// counts; a nonzero bin is one packet. Lines are indexed j = ((c*H)+h)*W + w
// and the flat voxel index is t*N + j with N = C*H*W.
class EventGrid {
public:
    EventGrid() = default;
    EventGrid(int t, int c, int h, int w, GridKind kind);

    int time_bins() const { return t_; }
    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    int lines() const { return n_; }
    GridKind kind() const { return kind_; }

    int line_index(int c, int h, int w) const;
    int line_channel(int j) const { return j / (h_ * w_); }

    int32_t at(int t, int j) const;
    int32_t at(int t, int c, int h, int w) const;
    void set(int t, int j, int32_t value);
    void set(int t, int c, int h, int w, int32_t value);

    const std::vector<int32_t>& values() const { return v_; }
    long long total() const;
    long long active_count() const;

    bool same_shape(const EventGrid& o) const;
    bool operator==(const EventGrid& o) const = default;

private:
    void check_bounds(int t, int j) const;

    int t_ = 0, c_ = 0, h_ = 0, w_ = 0, n_ = 0;
    GridKind kind_ = GridKind::binary;
    std::vector<int32_t> v_;
};

// Real-valued tensor with the same indexing, used for soft shifts, filter
// outputs and network inputs.
struct RealGrid {
    int t = 0, c = 0, h = 0, w = 0, n = 0;
    std::vector<double> v;

    RealGrid() = default;
    RealGrid(int t_, int c_, int h_, int w_)
        : t(t_), c(c_), h(h_), w(w_), n(c_ * h_ * w_),
          v(static_cast<size_t>(t_) * c_ * h_ * w_, 0.0) {}

    static RealGrid from(const EventGrid& g);

    double& at(int tt, int j) { return v[static_cast<size_t>(tt) * n + j]; }
    double at(int tt, int j) const { return v[static_cast<size_t>(tt) * n + j]; }
};

struct PacketIndex {
    int s = 0; // time bin
    int j = 0; // line
    auto operator<=>(const PacketIndex&) const = default;
};

// Sparse map from active packets to integer time displacements. Packets
// absent from the map stay in place; an explicit delta of 0 also means
// unmoved.
class DisplacementMap {
public:
    void set(PacketIndex p, int delta);
    int delta_or_zero(PacketIndex p) const;
    bool contains(PacketIndex p) const;
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Sorted by (s, j) ascending.
    const std::vector<std::pair<PacketIndex, int>>& entries() const { return entries_; }

    bool operator==(const DisplacementMap& o) const = default;

private:
    std::vector<std::pair<PacketIndex, int>> entries_;
};

// Active packets in s-major order, ties by line index ascending.
std::vector<PacketIndex> active_set(const EventGrid& g);

// Replays a displacement map onto a grid. Every packet must land inside
// [0, T) (timeline) and no two packets may land in the same bin of a line
// (capacity). Unmoved packets occupy their own bins, so a moved packet
// cannot land on an unmoved one.
EventGrid apply_displacement(const EventGrid& g, const DisplacementMap& dmap);

// True when every line carries the same multiset of nonzero values in both
// grids (rate preservation).
bool multiset_equal_per_line(const EventGrid& a, const EventGrid& b);

// Number of voxels whose values differ.
long long voxel_l0_distance(const EventGrid& a, const EventGrid& b);

// SRG1 text format: header "SRG1 <T> <C> <H> <W> <binary|integer>" followed
// by T*C*H*W whitespace-separated integers, t-major then c,h,w row-major.
EventGrid read_grid(const std::string& path);
void write_grid(const EventGrid& g, const std::string& path);
std::string grid_to_string(const EventGrid& g);
EventGrid grid_from_string(const std::string& text, const std::string& origin = "<string>");

struct RawEvent {
    double t = 0.0; // normalized timestamp in [0, 1)
    int c = 0, h = 0, w = 0;
    int32_t value = 1;
};

// Event-list CSV with header "t,c,h,w,value".
std::vector<RawEvent> read_event_csv(const std::string& path);

// Bins events into T uniform windows: bin = floor(t * T). Integer kind
// accumulates values, binary kind clamps presence to 1.
EventGrid bin_event_list(const std::vector<RawEvent>& events, int t, int c, int h, int w,
                         GridKind kind);

struct LabeledSample {
    EventGrid grid;
    int label = 0;
};

struct SynthSpec {
    int classes = 2;
    int samples_per_class = 100;
    int t = 8, c = 2, h = 4, w = 4;
    int spikes_per_line = 2;
    GridKind kind = GridKind::binary;
};

// Timing-phase-coded classes: every line carries exactly spikes_per_line
// spikes in every sample, so per-line counts are identical across classes
// and a rate-only readout is at chance. Classes differ in the relative
// phase between two interleaved groups of lines.
std::vector<LabeledSample> synth_dataset(const SynthSpec& spec, uint64_t seed);

// Dataset directory layout: manifest.csv with header "path,label" plus one
// SRG1 file per sample, paths relative to the manifest.
void write_dataset(const std::vector<LabeledSample>& samples, const std::string& dir);
std::vector<LabeledSample> load_dataset(const std::string& dir);

} // namespace retimer

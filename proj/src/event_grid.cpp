#include "retimer/event_grid.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "retimer/rng.hpp"

namespace retimer {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::invalid_spec: return "invalid spec";
    case Errc::invalid_budget: return "invalid budget";
    case Errc::parse: return "parse error";
    case Errc::io: return "io error";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::capacity_violation: return "capacity violation";
    case Errc::timeline_violation: return "timeline violation";
    case Errc::wrong_support: return "wrong support";
    case Errc::trace_mismatch: return "trace mismatch";
    case Errc::empty_active_set: return "empty active set";
    case Errc::too_large: return "too large";
    }
    return "unknown error";
}

EventGrid::EventGrid(int t, int c, int h, int w, GridKind kind)
    : t_(t), c_(c), h_(h), w_(w), n_(c * h * w), kind_(kind) {
    if (t < 1 || c < 1 || h < 1 || w < 1)
        raise(Errc::invalid_argument, "grid dims must be positive");
    v_.assign(static_cast<size_t>(t_) * n_, 0);
}

int EventGrid::line_index(int c, int h, int w) const {
    if (c < 0 || c >= c_ || h < 0 || h >= h_ || w < 0 || w >= w_)
        raise(Errc::invalid_argument, "coordinate out of range");
    return ((c * h_) + h) * w_ + w;
}

void EventGrid::check_bounds(int t, int j) const {
    if (t < 0 || t >= t_ || j < 0 || j >= n_)
        raise(Errc::invalid_argument, "voxel index out of range");
}

int32_t EventGrid::at(int t, int j) const {
    check_bounds(t, j);
    return v_[static_cast<size_t>(t) * n_ + j];
}

int32_t EventGrid::at(int t, int c, int h, int w) const {
    return at(t, line_index(c, h, w));
}

void EventGrid::set(int t, int j, int32_t value) {
    check_bounds(t, j);
    if (value < 0)
        raise(Errc::invalid_argument, "grid values must be non-negative");
    if (kind_ == GridKind::binary && value > 1)
        raise(Errc::invalid_argument, "binary grid values must be 0 or 1");
    v_[static_cast<size_t>(t) * n_ + j] = value;
}

void EventGrid::set(int t, int c, int h, int w, int32_t value) {
    set(t, line_index(c, h, w), value);
}

long long EventGrid::total() const {
    long long s = 0;
    for (int32_t x : v_) s += x;
    return s;
}

long long EventGrid::active_count() const {
    long long s = 0;
    for (int32_t x : v_) s += (x > 0);
    return s;
}

bool EventGrid::same_shape(const EventGrid& o) const {
    return t_ == o.t_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
}

RealGrid RealGrid::from(const EventGrid& g) {
    RealGrid r(g.time_bins(), g.channels(), g.height(), g.width());
    const auto& v = g.values();
    for (size_t i = 0; i < v.size(); ++i) r.v[i] = static_cast<double>(v[i]);
    return r;
}

void DisplacementMap::set(PacketIndex p, int delta) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), p,
                               [](const auto& e, const PacketIndex& k) { return e.first < k; });
    if (it != entries_.end() && it->first == p)
        it->second = delta;
    else
        entries_.insert(it, {p, delta});
}

int DisplacementMap::delta_or_zero(PacketIndex p) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), p,
                               [](const auto& e, const PacketIndex& k) { return e.first < k; });
    if (it != entries_.end() && it->first == p) return it->second;
    return 0;
}

bool DisplacementMap::contains(PacketIndex p) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), p,
                               [](const auto& e, const PacketIndex& k) { return e.first < k; });
    return it != entries_.end() && it->first == p;
}

std::vector<PacketIndex> active_set(const EventGrid& g) {
    std::vector<PacketIndex> out;
    for (int s = 0; s < g.time_bins(); ++s)
        for (int j = 0; j < g.lines(); ++j)
            if (g.at(s, j) > 0) out.push_back({s, j});
    return out;
}

EventGrid apply_displacement(const EventGrid& g, const DisplacementMap& dmap) {
    for (const auto& [p, delta] : dmap.entries()) {
        if (p.s < 0 || p.s >= g.time_bins() || p.j < 0 || p.j >= g.lines())
            raise(Errc::invalid_argument, "displacement entry outside the grid");
        if (g.at(p.s, p.j) == 0)
            raise(Errc::invalid_argument, "displacement entry for an inactive packet");
        (void)delta;
    }
    EventGrid out(g.time_bins(), g.channels(), g.height(), g.width(), g.kind());
    for (int s = 0; s < g.time_bins(); ++s) {
        for (int j = 0; j < g.lines(); ++j) {
            int32_t val = g.at(s, j);
            if (val == 0) continue;
            int t = s + dmap.delta_or_zero({s, j});
            if (t < 0 || t >= g.time_bins())
                raise(Errc::timeline_violation,
                      "packet at (s=" + std::to_string(s) + ", j=" + std::to_string(j) +
                          ") lands outside [0, T)");
            if (out.at(t, j) != 0)
                raise(Errc::capacity_violation,
                      "two packets land in bin (t=" + std::to_string(t) +
                          ", j=" + std::to_string(j) + ")");
            out.set(t, j, val);
        }
    }
    return out;
}

bool multiset_equal_per_line(const EventGrid& a, const EventGrid& b) {
    if (!a.same_shape(b)) raise(Errc::shape_mismatch, "grids differ in shape");
    std::vector<int32_t> va, vb;
    for (int j = 0; j < a.lines(); ++j) {
        va.clear();
        vb.clear();
        for (int t = 0; t < a.time_bins(); ++t) {
            if (int32_t x = a.at(t, j)) va.push_back(x);
            if (int32_t x = b.at(t, j)) vb.push_back(x);
        }
        std::sort(va.begin(), va.end());
        std::sort(vb.begin(), vb.end());
        if (va != vb) return false;
    }
    return true;
}

long long voxel_l0_distance(const EventGrid& a, const EventGrid& b) {
    if (!a.same_shape(b)) raise(Errc::shape_mismatch, "grids differ in shape");
    long long d = 0;
    for (size_t i = 0; i < a.values().size(); ++i)
        d += (a.values()[i] != b.values()[i]);
    return d;
}

std::string grid_to_string(const EventGrid& g) {
    std::ostringstream os;
    os << "SRG1 " << g.time_bins() << ' ' << g.channels() << ' ' << g.height() << ' '
       << g.width() << ' ' << (g.kind() == GridKind::binary ? "binary" : "integer") << '\n';
    for (int t = 0; t < g.time_bins(); ++t) {
        for (int c = 0; c < g.channels(); ++c) {
            for (int h = 0; h < g.height(); ++h) {
                for (int w = 0; w < g.width(); ++w) {
                    if (w) os << ' ';
                    os << g.at(t, c, h, w);
                }
                os << '\n';
            }
        }
    }
    return os.str();
}

EventGrid grid_from_string(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string magic;
    is >> magic;
    if (magic != "SRG1")
        raise(Errc::parse, origin + ": bad magic, expected SRG1");
    long t, c, h, w;
    std::string kind_str;
    if (!(is >> t >> c >> h >> w >> kind_str))
        raise(Errc::parse, origin + ": malformed SRG1 header");
    if (t < 1 || c < 1 || h < 1 || w < 1)
        raise(Errc::parse, origin + ": SRG1 dims must be positive");
    GridKind kind;
    if (kind_str == "binary")
        kind = GridKind::binary;
    else if (kind_str == "integer")
        kind = GridKind::integer;
    else
        raise(Errc::parse, origin + ": unknown grid kind '" + kind_str + "'");
    EventGrid g(static_cast<int>(t), static_cast<int>(c), static_cast<int>(h),
                static_cast<int>(w), kind);
    size_t count = static_cast<size_t>(t) * c * h * w;
    for (size_t i = 0; i < count; ++i) {
        long long val;
        if (!(is >> val))
            raise(Errc::parse, origin + ": expected " + std::to_string(count) +
                                   " values, got " + std::to_string(i));
        if (val < 0)
            raise(Errc::parse, origin + ": negative value at index " + std::to_string(i));
        if (kind == GridKind::binary && val > 1)
            raise(Errc::parse,
                  origin + ": binary grid holds value " + std::to_string(val) + " at index " +
                      std::to_string(i));
        g.set(static_cast<int>(i / (c * h * w)), static_cast<int>(i % (c * h * w)),
              static_cast<int32_t>(val));
    }
    std::string extra;
    if (is >> extra)
        raise(Errc::parse, origin + ": trailing data '" + extra + "'");
    return g;
}

EventGrid read_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open grid file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return grid_from_string(buf.str(), path);
}

void write_grid(const EventGrid& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write grid file " + path);
    out << grid_to_string(g);
    if (!out) raise(Errc::io, "short write to " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

std::vector<RawEvent> read_event_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open event file " + path);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"t", "c", "h", "w", "value"})
        raise(Errc::parse, path + ": expected header t,c,h,w,value");
    std::vector<RawEvent> events;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 5)
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": expected 5 columns");
        RawEvent e;
        try {
            e.t = std::stod(cols[0]);
            e.c = std::stoi(cols[1]);
            e.h = std::stoi(cols[2]);
            e.w = std::stoi(cols[3]);
            e.value = std::stoi(cols[4]);
        } catch (const std::exception&) {
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": malformed number");
        }
        events.push_back(e);
    }
    return events;
}

EventGrid bin_event_list(const std::vector<RawEvent>& events, int t, int c, int h, int w,
                         GridKind kind) {
    EventGrid g(t, c, h, w, kind);
    for (size_t i = 0; i < events.size(); ++i) {
        const RawEvent& e = events[i];
        if (!(e.t >= 0.0 && e.t < 1.0))
            raise(Errc::invalid_argument,
                  "event " + std::to_string(i) + " has timestamp outside [0, 1)");
        if (e.c < 0 || e.c >= c || e.h < 0 || e.h >= h || e.w < 0 || e.w >= w)
            raise(Errc::invalid_argument,
                  "event " + std::to_string(i) + " has coordinates outside the grid");
        if (e.value < 0)
            raise(Errc::invalid_argument, "event " + std::to_string(i) + " has negative value");
        int bin = static_cast<int>(e.t * t);
        int j = g.line_index(e.c, e.h, e.w);
        if (kind == GridKind::binary)
            g.set(bin, j, e.value > 0 ? 1 : g.at(bin, j));
        else
            g.set(bin, j, g.at(bin, j) + e.value);
    }
    return g;
}

std::vector<LabeledSample> synth_dataset(const SynthSpec& spec, uint64_t seed) {
    if (spec.classes < 1) raise(Errc::invalid_spec, "need at least one class");
    if (spec.samples_per_class < 1) raise(Errc::invalid_spec, "need at least one sample per class");
    if (spec.t < 1 || spec.c < 1 || spec.h < 1 || spec.w < 1)
        raise(Errc::invalid_spec, "grid dims must be positive");
    if (spec.spikes_per_line < 1) raise(Errc::invalid_spec, "need at least one spike per line");
    if (spec.t % spec.spikes_per_line != 0)
        raise(Errc::invalid_spec, "time bins must be a multiple of spikes_per_line");
    int period = spec.t / spec.spikes_per_line;
    if (period < 2)
        raise(Errc::invalid_spec, "need at least two time bins per spike");
    if (spec.classes > period)
        raise(Errc::invalid_spec, "classes exceed the number of distinct phases");

    std::vector<LabeledSample> out;
    out.reserve(static_cast<size_t>(spec.classes) * spec.samples_per_class);
    for (int k = 0; k < spec.classes; ++k) {
        // Group A lines keep phase 0; group B lines lead by k*period/classes
        // bins. Classes are separated only by this relative phase.
        int phase_b = (k * period) / spec.classes;
        for (int idx = 0; idx < spec.samples_per_class; ++idx) {
            Rng rng(mix_seed(seed, (static_cast<uint64_t>(k) << 32) | static_cast<uint64_t>(idx)));
            EventGrid g(spec.t, spec.c, spec.h, spec.w, spec.kind);
            for (int c = 0; c < spec.c; ++c) {
                for (int h = 0; h < spec.h; ++h) {
                    for (int w = 0; w < spec.w; ++w) {
                        int j = g.line_index(c, h, w);
                        int phase = ((c + h + w) % 2 == 0) ? 0 : phase_b;
                        for (int i = 0; i < spec.spikes_per_line; ++i) {
                            int jitter = rng.uniform_int(0, 1);
                            int t = (phase + i * period + jitter) % spec.t;
                            int32_t val = spec.kind == GridKind::binary ? 1 : 1 + ((j + i) % 2);
                            g.set(t, j, val);
                        }
                    }
                }
            }
            out.push_back({std::move(g), k});
        }
    }
    return out;
}

void write_dataset(const std::vector<LabeledSample>& samples, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(Errc::io, "cannot create dataset directory " + dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) raise(Errc::io, "cannot write manifest in " + dir);
    manifest << "path,label\n";
    for (size_t i = 0; i < samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%05zu.srg", i);
        write_grid(samples[i].grid, (fs::path(dir) / name).string());
        manifest << name << ',' << samples[i].label << '\n';
    }
    if (!manifest) raise(Errc::io, "short write to manifest in " + dir);
}

std::vector<LabeledSample> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path manifest_path = fs::path(dir) / "manifest.csv";
    std::ifstream in(manifest_path);
    if (!in) raise(Errc::io, "cannot open " + manifest_path.string());
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"path", "label"})
        raise(Errc::parse, manifest_path.string() + ": expected header path,label");
    std::vector<LabeledSample> samples;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 2)
            raise(Errc::parse, manifest_path.string() + ":" + std::to_string(lineno) +
                                   ": expected 2 columns");
        int label;
        try {
            label = std::stoi(cols[1]);
        } catch (const std::exception&) {
            raise(Errc::parse, manifest_path.string() + ":" + std::to_string(lineno) +
                                   ": malformed label");
        }
        samples.push_back({read_grid((fs::path(dir) / cols[0]).string()), label});
    }
    return samples;
}

} // namespace retimer

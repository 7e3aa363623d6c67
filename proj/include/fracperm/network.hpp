#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "geometry.hpp"

namespace fracperm {

/// Points closer than this are the same vertex.
inline constexpr double kMergeTolerance = 1e-9;
/// Degenerate (zero-extent) bounding boxes are padded by this much per side.
inline constexpr double kDegeneratePadding = 1e-6;

struct NetworkSegment {
    std::array<int, 2> ends;  // indices into FractureNetwork::points
    int fracture;             // index into FractureNetwork::fractures
};

/// Two distinct fractures meeting at a network vertex.
struct Intersection {
    int fracture_a, fracture_b;
    int segment_a, segment_b;  // one segment of each fracture incident to the point
    int point;
};

struct FractureNetwork {
    std::vector<Vec2> points;
    std::vector<std::vector<int>> fractures;  // polylines as point indices
    std::vector<std::string> labels;          // external fracture ids, parallel to `fractures`
    std::vector<NetworkSegment> segments;
    std::vector<Intersection> intersections;

    bool empty() const { return segments.empty(); }

    double segment_length(int s) const {
        return (points[segments[s].ends[1]] - points[segments[s].ends[0]]).norm();
    }

    double trace_length() const {
        double total = 0;
        for (int s = 0; s < int(segments.size()); ++s) total += segment_length(s);
        return total;
    }

    double fracture_length(int f) const {
        double total = 0;
        const auto& poly = fractures[f];
        for (size_t i = 1; i < poly.size(); ++i) total += (points[poly[i]] - points[poly[i - 1]]).norm();
        return total;
    }

    Rect bounding_box() const {
        Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto& seg : segments)
            for (int e : seg.ends) {
                const Vec2& p = points[e];
                r.xmin = std::min(r.xmin, p.x());
                r.ymin = std::min(r.ymin, p.y());
                r.xmax = std::max(r.xmax, p.x());
                r.ymax = std::max(r.ymax, p.y());
            }
        return r;
    }
};

enum class NetworkFormat { SegmentList, PolylineJson };

inline NetworkFormat parse_network_format(const std::string& s) {
    if (s == "segment-list") return NetworkFormat::SegmentList;
    if (s == "polyline-json") return NetworkFormat::PolylineJson;
    throw ParseError("unknown network format '" + s + "' (expected segment-list or polyline-json)");
}

inline const char* format_name(NetworkFormat f) {
    return f == NetworkFormat::SegmentList ? "segment-list" : "polyline-json";
}

/// Raw fracture input before topology is built.
struct PolylineInput {
    std::string label;
    std::vector<Vec2> points;
};

namespace detail {

/// Hash grid that merges points within kMergeTolerance. The first inserted
/// coordinate wins, so every reference to a merged vertex is bitwise identical.
class PointPool {
public:
    explicit PointPool(std::vector<Vec2>& points) : points_(points) {
        for (int i = 0; i < int(points_.size()); ++i) grid_[key(cell(points_[i]))].push_back(i);
    }

    int insert(const Vec2& p) {
        const auto c = cell(p);
        for (int64_t dx = -1; dx <= 1; ++dx)
            for (int64_t dy = -1; dy <= 1; ++dy) {
                auto it = grid_.find(key({c[0] + dx, c[1] + dy}));
                if (it == grid_.end()) continue;
                for (int idx : it->second)
                    if ((points_[idx] - p).norm() <= kMergeTolerance) return idx;
            }
        points_.push_back(p);
        grid_[key(c)].push_back(int(points_.size()) - 1);
        return int(points_.size()) - 1;
    }

private:
    static constexpr double kCell = 4 * kMergeTolerance;

    static std::array<int64_t, 2> cell(const Vec2& p) {
        return {int64_t(std::floor(p.x() / kCell)), int64_t(std::floor(p.y() / kCell))};
    }
    static uint64_t key(std::array<int64_t, 2> c) {
        return uint64_t(c[0]) * 0x9E3779B97F4A7C15ull ^ (uint64_t(c[1]) + 0x632BE59BD9B4E019ull);
    }

    std::vector<Vec2>& points_;
    std::unordered_map<uint64_t, std::vector<int>> grid_;
};

struct SplitPoint {
    double t;
    int point;
};

/// Splits every polyline at all mutual crossings and T-contacts, then derives
/// segments and intersection records.
inline FractureNetwork build_topology(std::vector<Vec2> points, std::vector<std::vector<int>> polylines,
                                      std::vector<std::string> labels) {
    PointPool pool(points);

    struct RawSeg {
        int poly, index, a, b;
    };
    std::vector<RawSeg> raw;
    for (int f = 0; f < int(polylines.size()); ++f) {
        const auto& poly = polylines[f];
        if (poly.size() < 2) throw DegenerateGeometry("fracture '" + labels[f] + "' has fewer than two points");
        for (int i = 0; i + 1 < int(poly.size()); ++i) {
            if (poly[i] == poly[i + 1])
                throw DegenerateGeometry("fracture '" + labels[f] + "' has a zero-length segment");
            raw.push_back({f, i, poly[i], poly[i + 1]});
        }
    }

    std::vector<std::vector<SplitPoint>> splits(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        const Vec2 a = points[raw[i].a], b = points[raw[i].b];
        const Vec2 ab = b - a;
        const double len_ab = ab.norm();
        for (size_t j = i + 1; j < raw.size(); ++j) {
            const Vec2 c = points[raw[j].a], d = points[raw[j].b];
            const Vec2 cd = d - c;
            const double len_cd = cd.norm();

            // Cheap bounding-box rejection.
            if (std::max(a.x(), b.x()) + kMergeTolerance < std::min(c.x(), d.x()) ||
                std::max(c.x(), d.x()) + kMergeTolerance < std::min(a.x(), b.x()) ||
                std::max(a.y(), b.y()) + kMergeTolerance < std::min(c.y(), d.y()) ||
                std::max(c.y(), d.y()) + kMergeTolerance < std::min(a.y(), b.y()))
                continue;

            const double denom = cross(ab, cd);
            const bool parallel = std::abs(denom) <= 1e-14 * len_ab * len_cd;
            if (parallel) {
                const double offset = std::abs(cross(ab, c - a)) / len_ab;
                if (offset > kMergeTolerance) continue;
                // Collinear: any overlap of positive length is ambiguous geometry.
                const double t0 = (c - a).dot(ab) / (len_ab * len_ab);
                const double t1 = (d - a).dot(ab) / (len_ab * len_ab);
                const double lo = std::max(0.0, std::min(t0, t1)), hi = std::min(1.0, std::max(t0, t1));
                if ((hi - lo) * len_ab > kMergeTolerance)
                    throw DegenerateGeometry("collinear overlapping fracture segments in '" + labels[raw[i].poly] +
                                             "' and '" + labels[raw[j].poly] + "'");
                continue;
            }

            // Endpoint-on-segment contacts are resolved by distance so that
            // T-junctions snap to the existing vertex.
            auto touch = [&](int vid, const Vec2& p0, const Vec2& dir, double len, size_t seg) {
                const Vec2& p = points[vid];
                const double t = (p - p0).dot(dir) / (len * len);
                if (t * len <= kMergeTolerance || (1 - t) * len <= kMergeTolerance) return false;
                if (t < 0 || t > 1) return false;
                if (point_segment_distance(p, p0, p0 + dir) > kMergeTolerance) return false;
                splits[seg].push_back({t, vid});
                return true;
            };
            bool handled = false;
            handled |= touch(raw[j].a, a, ab, len_ab, i);
            handled |= touch(raw[j].b, a, ab, len_ab, i);
            handled |= touch(raw[i].a, c, cd, len_cd, j);
            handled |= touch(raw[i].b, c, cd, len_cd, j);
            if (handled) continue;

            const double s = cross(c - a, cd) / denom;
            const double u = cross(c - a, ab) / denom;
            if (s < 0 || s > 1 || u < 0 || u > 1) continue;
            const bool s_at_end = s * len_ab <= kMergeTolerance || (1 - s) * len_ab <= kMergeTolerance;
            const bool u_at_end = u * len_cd <= kMergeTolerance || (1 - u) * len_cd <= kMergeTolerance;
            if (s_at_end && u_at_end) continue;  // shared endpoint, already topologically joined
            const int pid = pool.insert(a + s * ab);
            if (!s_at_end) splits[i].push_back({s, pid});
            if (!u_at_end) splits[j].push_back({u, pid});
        }
    }

    // Rebuild polylines with split vertices inserted in parametric order.
    std::vector<std::vector<int>> out(polylines.size());
    for (size_t k = 0; k < raw.size(); ++k) {
        auto& poly = out[raw[k].poly];
        if (poly.empty()) poly.push_back(raw[k].a);
        auto& sp = splits[k];
        std::sort(sp.begin(), sp.end(), [](const SplitPoint& l, const SplitPoint& r) { return l.t < r.t; });
        for (const auto& s : sp)
            if (poly.back() != s.point) poly.push_back(s.point);
        if (poly.back() != raw[k].b) poly.push_back(raw[k].b);
    }

    FractureNetwork net;
    net.points = std::move(points);
    net.fractures = std::move(out);
    net.labels = std::move(labels);
    for (int f = 0; f < int(net.fractures.size()); ++f) {
        const auto& poly = net.fractures[f];
        for (int i = 0; i + 1 < int(poly.size()); ++i) {
            if (poly[i] == poly[i + 1])
                throw DegenerateGeometry("fracture '" + net.labels[f] + "' has a zero-length segment");
            net.segments.push_back({{poly[i], poly[i + 1]}, f});
        }
    }

    // Intersection records: every pair of distinct fractures sharing a vertex.
    std::map<int, std::vector<int>> incident;  // point -> segments, ordered for determinism
    for (int s = 0; s < int(net.segments.size()); ++s)
        for (int e : net.segments[s].ends) incident[e].push_back(s);
    for (const auto& [pid, segs] : incident) {
        std::map<int, int> first_segment;  // fracture -> first incident segment
        for (int s : segs) first_segment.emplace(net.segments[s].fracture, s);
        for (auto it = first_segment.begin(); it != first_segment.end(); ++it)
            for (auto jt = std::next(it); jt != first_segment.end(); ++jt)
                net.intersections.push_back({it->first, jt->first, it->second, jt->second, pid});
    }

    // Drop vertices not referenced by any segment so bounding boxes stay tight.
    std::vector<int> remap(net.points.size(), -1);
    std::vector<Vec2> compact;
    for (auto& poly : net.fractures)
        for (int& v : poly) {
            if (remap[v] < 0) {
                remap[v] = int(compact.size());
                compact.push_back(net.points[v]);
            }
            v = remap[v];
        }
    for (auto& seg : net.segments)
        for (int& e : seg.ends) e = remap[e];
    for (auto& x : net.intersections) x.point = remap[x.point];
    net.points = std::move(compact);
    return net;
}

}  // namespace detail

/// Builds a network from raw polylines: merges vertices within 1e-9 m and
/// splits fractures at every mutual intersection.
inline FractureNetwork make_network(const std::vector<PolylineInput>& input) {
    std::vector<Vec2> points;
    detail::PointPool pool(points);
    std::vector<std::vector<int>> polylines;
    std::vector<std::string> labels;
    for (const auto& f : input) {
        std::vector<int> poly;
        for (const auto& p : f.points) {
            if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
                throw ParseError("non-finite coordinate in fracture '" + f.label + "'");
            poly.push_back(pool.insert(p));
        }
        polylines.push_back(std::move(poly));
        labels.push_back(f.label);
    }
    return detail::build_topology(std::move(points), std::move(polylines), std::move(labels));
}

inline std::vector<PolylineInput> parse_segment_list(std::istream& in) {
    std::vector<PolylineInput> out;
    std::map<std::string, int> last_for_label;  // label -> index of the open polyline
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 5)
            throw ParseError("line " + std::to_string(lineno) + ": expected 'x1 y1 x2 y2 fracture_id', got " +
                             std::to_string(tok.size()) + " fields");
        double v[4];
        for (int k = 0; k < 4; ++k) {
            size_t used = 0;
            try {
                v[k] = std::stod(tok[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok[k].size() || !std::isfinite(v[k]))
                throw ParseError("line " + std::to_string(lineno) + ": bad coordinate '" + tok[k] + "'");
        }
        const Vec2 p{v[0], v[1]}, q{v[2], v[3]};
        const std::string& label = tok[4];

        auto it = last_for_label.find(label);
        if (it != last_for_label.end()) {
            auto& pts = out[it->second].points;
            if ((pts.back() - p).norm() <= kMergeTolerance) {
                pts.push_back(q);
                continue;
            }
            if ((pts.back() - q).norm() <= kMergeTolerance) {
                pts.push_back(p);
                continue;
            }
        }
        out.push_back({label, {p, q}});
        last_for_label[label] = int(out.size()) - 1;
    }
    return out;
}

inline std::vector<PolylineInput> parse_polyline_json(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("polyline-json: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("polyline-json: top level must be a list of fractures");
    std::vector<PolylineInput> out;
    for (size_t f = 0; f < doc.size(); ++f) {
        const auto& frac = doc[f];
        if (!frac.is_array() || frac.size() < 2)
            throw ParseError("polyline-json: fracture " + std::to_string(f) + " must be a list of >= 2 [x,y] pairs");
        PolylineInput poly{std::to_string(f), {}};
        for (const auto& pt : frac) {
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
                throw ParseError("polyline-json: fracture " + std::to_string(f) + " has a malformed point");
            poly.points.emplace_back(pt[0].get<double>(), pt[1].get<double>());
        }
        out.push_back(std::move(poly));
    }
    return out;
}

inline FractureNetwork load_network(const std::filesystem::path& path, NetworkFormat format) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file " + path.string());
    auto polylines = format == NetworkFormat::SegmentList ? parse_segment_list(in) : parse_polyline_json(in);
    if (polylines.empty()) throw ParseError("network file " + path.string() + " contains no fractures");
    return make_network(polylines);
}

namespace detail {

inline void douglas_peucker(const std::vector<Vec2>& pts, const std::vector<int>& run, size_t lo, size_t hi,
                            double tol, std::vector<char>& keep) {
    if (hi <= lo + 1) return;
    const Vec2& a = pts[run[lo]];
    const Vec2& b = pts[run[hi]];
    double worst = -1;
    size_t arg = lo;
    for (size_t i = lo + 1; i < hi; ++i) {
        const double d = point_segment_distance(pts[run[i]], a, b);
        if (d > worst) {
            worst = d;
            arg = i;
        }
    }
    if (worst > tol) {
        keep[arg] = 1;
        douglas_peucker(pts, run, lo, arg, tol, keep);
        douglas_peucker(pts, run, arg, hi, tol, keep);
    }
}

}  // namespace detail

/// Replaces each polyline by chords so that no removed vertex deviates from
/// its chord by more than `chord_tol`. Endpoints and vertices shared with
/// other fractures are never removed.
inline FractureNetwork linearize(const FractureNetwork& net, double chord_tol) {
    if (!(chord_tol > 0)) throw InvalidArgument("linearize: chord_tol must be positive");

    std::vector<int> usage(net.points.size(), 0);
    for (const auto& poly : net.fractures)
        for (int v : poly) ++usage[v];

    std::vector<std::vector<int>> polylines;
    for (const auto& poly : net.fractures) {
        std::vector<char> keep(poly.size(), 0);
        keep.front() = keep.back() = 1;
        for (size_t i = 0; i < poly.size(); ++i)
            if (usage[poly[i]] > 1) keep[i] = 1;
        size_t lo = 0;
        for (size_t i = 1; i < poly.size(); ++i) {
            if (!keep[i]) continue;
            detail::douglas_peucker(net.points, poly, lo, i, chord_tol, keep);
            lo = i;
        }
        std::vector<int> simplified;
        for (size_t i = 0; i < poly.size(); ++i)
            if (keep[i]) simplified.push_back(poly[i]);
        polylines.push_back(std::move(simplified));
    }
    return detail::build_topology(net.points, std::move(polylines), net.labels);
}

/// Mechanical and flow windows of a simulation.
struct Domain {
    Rect flow_window;
    Rect mech_window;
    double buffer_fraction = 0.5;
};

inline Domain build_domain(const FractureNetwork& net, double buffer_fraction = 0.5) {
    if (net.empty()) throw EmptyNetwork("build_domain: network has no segments");
    if (!(buffer_fraction >= 0) || !std::isfinite(buffer_fraction))
        throw InvalidArgument("build_domain: buffer_fraction must be >= 0");
    Rect flow = net.bounding_box();
    if (flow.width() <= 0) {
        flow.xmin -= kDegeneratePadding;
        flow.xmax += kDegeneratePadding;
    }
    if (flow.height() <= 0) {
        flow.ymin -= kDegeneratePadding;
        flow.ymax += kDegeneratePadding;
    }
    const double buffer = buffer_fraction * std::max(flow.width(), flow.height());
    Rect mech{flow.xmin - buffer, flow.ymin - buffer, flow.xmax + buffer, flow.ymax + buffer};
    return {flow, mech, buffer_fraction};
}

}  // namespace fracperm

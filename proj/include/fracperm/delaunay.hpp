#pragma once

// Delaunay refinement of a planar straight-line graph inside a rectangle.
//
// Vertices are inserted with Bowyer-Watson into a triangulation enclosed by a
// large super triangle. Constrained edges (subsegments) are recovered by
// splitting them until no vertex lies inside their diametral circle, so the
// final triangulation is a conforming Delaunay triangulation. Bad triangles
// (small angle or too large) are removed by circumcenter insertion; a
// circumcenter that would encroach a subsegment splits that subsegment
// instead. Subsegments hanging off an input vertex are split on concentric
// power-of-two shells so that small input angles cannot cause endless
// mutual splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace fracperm::detail {

struct Subsegment {
    int a, b;
    int parent;     // caller-defined tag (fracture segment id, or -1 - side for boundary)
    bool boundary;
    bool alive;
};

class RefiningTriangulator {
public:
    struct Options {
        double max_edge = 1.0;        // target edge length
        double min_angle_deg = 20.0;  // refinement threshold
        double min_length = 1e-7;     // subsegments are never split below this
        size_t max_vertices = 2'000'000;
    };

    RefiningTriangulator(const Rect& bounds, Options opt) : bounds_(bounds), opt_(opt) {
        const Vec2 c = bounds.center();
        const double d = std::max(bounds.width(), bounds.height());
        pts_ = {Vec2(c.x() - 60 * d, c.y() - 40 * d), Vec2(c.x() + 60 * d, c.y() - 40 * d),
                Vec2(c.x(), c.y() + 80 * d)};
        input_ = {0, 0, 0};
        tris_.push_back({{0, 1, 2}, {-1, -1, -1}});
        vtri_ = {0, 0, 0};
        sin_min_ = std::sin(opt_.min_angle_deg * M_PI / 180.0);
    }

    /// Adds a vertex; returns its index. `input` vertices anchor shell splitting.
    int add_vertex(const Vec2& p, bool input = true) {
        const int v = insert(p, nullptr);
        input_[v] = input ? 1 : 0;
        return v;
    }

    void add_segment(int a, int b, int parent, bool boundary) {
        subs_.push_back({a, b, parent, boundary, true});
        submap_[edge_key(a, b)] = int(subs_.size()) - 1;
    }

    void refine() {
        for (int s = 0; s < int(subs_.size()); ++s) seg_queue_.push_back(s);
        for (int t = 0; t < int(tris_.size()); ++t) queue_triangle(t);

        while (true) {
            while (!seg_queue_.empty()) {
                const int s = seg_queue_.front();
                seg_queue_.pop_front();
                if (subs_[s].alive && encroached(s)) split(s);
            }
            if (tri_queue_.empty()) break;
            const auto item = tri_queue_.front();
            tri_queue_.pop_front();
            const Tri& t = tris_[item.t];
            if (t.v != item.v) continue;
            if (!is_bad(item.t)) continue;

            const Vec2 c = circumcenter(item.t);
            std::vector<int> enc = encroached_by(c);
            if (!enc.empty()) {
                for (int s : enc)
                    if (subs_[s].alive) split(s);
                queue_triangle(item.t);
                continue;
            }
            std::vector<int> touched;
            const int v = insert(c, &touched);
            input_[v] = 0;
            for (int s : touched) seg_queue_.push_back(s);
        }
    }

    /// Real vertices: super triangle vertices stripped, indices shifted by 3.
    std::vector<Vec2> vertices() const { return {pts_.begin() + 3, pts_.end()}; }

    std::vector<std::array<int, 3>> triangles() const {
        std::vector<std::array<int, 3>> out;
        for (const auto& t : tris_) {
            if (t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) continue;
            out.push_back({t.v[0] - 3, t.v[1] - 3, t.v[2] - 3});
        }
        return out;
    }

    std::vector<Subsegment> subsegments() const {
        std::vector<Subsegment> out;
        for (const auto& s : subs_)
            if (s.alive) out.push_back({s.a - 3, s.b - 3, s.parent, s.boundary, true});
        return out;
    }

    /// Index shift between internal and exported vertex ids.
    static constexpr int kOffset = 3;

private:
    struct Tri {
        std::array<int, 3> v;
        std::array<int, 3> nb;  // nb[i] is across the edge opposite v[i]; -1 outside
    };
    struct QueuedTri {
        int t;
        std::array<int, 3> v;
    };

    static uint64_t edge_key(int a, int b) {
        if (a > b) std::swap(a, b);
        return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
    }

    long double orient_ld(const Vec2& a, const Vec2& b, const Vec2& c) const {
        return ((long double)b.x() - a.x()) * ((long double)c.y() - a.y()) -
               ((long double)b.y() - a.y()) * ((long double)c.x() - a.x());
    }

    // Positive when d lies inside the circumcircle of counter-clockwise (a, b, c).
    long double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) const {
        const long double adx = (long double)a.x() - d.x(), ady = (long double)a.y() - d.y();
        const long double bdx = (long double)b.x() - d.x(), bdy = (long double)b.y() - d.y();
        const long double cdx = (long double)c.x() - d.x(), cdy = (long double)c.y() - d.y();
        const long double ad = adx * adx + ady * ady;
        const long double bd = bdx * bdx + bdy * bdy;
        const long double cd = cdx * cdx + cdy * cdy;
        return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    }

    bool in_circumcircle(int t, const Vec2& p) const {
        const auto& v = tris_[t].v;
        return incircle(pts_[v[0]], pts_[v[1]], pts_[v[2]], p) > 0;
    }

    bool alive(int t) const { return t >= 0 && tris_[t].v[0] >= 0; }

    int locate(const Vec2& p) const {
        int t = alive(last_) ? last_ : -1;
        if (t < 0)
            for (int i = 0; i < int(tris_.size()); ++i)
                if (alive(i)) {
                    t = i;
                    break;
                }
        const size_t limit = 4 * tris_.size() + 16;
        for (size_t step = 0; step < limit; ++step) {
            const auto& tri = tris_[t];
            bool moved = false;
            for (int k = 0; k < 3; ++k) {
                const int i = int((k + step) % 3);
                const int a = tri.v[(i + 1) % 3], b = tri.v[(i + 2) % 3];
                if (orient_ld(pts_[a], pts_[b], p) < 0) {
                    t = tri.nb[i];
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
            if (t < 0) return -1;
        }
        // Walk cycled (degenerate input); fall back to exhaustive search.
        for (int i = 0; i < int(tris_.size()); ++i) {
            if (!alive(i)) continue;
            const auto& v = tris_[i].v;
            if (orient_ld(pts_[v[0]], pts_[v[1]], p) >= 0 && orient_ld(pts_[v[1]], pts_[v[2]], p) >= 0 &&
                orient_ld(pts_[v[2]], pts_[v[0]], p) >= 0)
                return i;
        }
        return -1;
    }

    struct Cavity {
        std::vector<int> tris;
        struct Edge {
            int a, b, outer, inner;
        };
        std::vector<Edge> boundary;
    };

    Cavity find_cavity(int t0, const Vec2& p) {
        ++stamp_;
        if (mark_.size() < tris_.size()) mark_.resize(tris_.size(), 0);
        Cavity cav;
        std::vector<int> stack{t0};
        mark_[t0] = stamp_;
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            cav.tris.push_back(t);
            for (int i = 0; i < 3; ++i) {
                const int n = tris_[t].nb[i];
                if (n >= 0 && mark_[n] == stamp_) continue;
                if (n >= 0 && in_circumcircle(n, p)) {
                    mark_[n] = stamp_;
                    stack.push_back(n);
                }
            }
        }
        // Boundary, with repair so the cavity is star-shaped from p.
        for (int pass = 0; pass < 64; ++pass) {
            cav.boundary.clear();
            bool repaired = false;
            for (int t : cav.tris) {
                for (int i = 0; i < 3 && !repaired; ++i) {
                    const int n = tris_[t].nb[i];
                    if (n >= 0 && mark_[n] == stamp_) continue;
                    const int a = tris_[t].v[(i + 1) % 3], b = tris_[t].v[(i + 2) % 3];
                    if (orient_ld(pts_[a], pts_[b], p) <= 0 && n >= 0) {
                        mark_[n] = stamp_;
                        cav.tris.push_back(n);
                        repaired = true;
                        break;
                    }
                    cav.boundary.push_back({a, b, n, t});
                }
                if (repaired) break;
            }
            if (!repaired) return cav;
        }
        throw MeshFailure("Delaunay cavity could not be made star-shaped");
    }

    int insert(const Vec2& p, std::vector<int>* touched_subs) {
        const int t0 = locate(p);
        if (t0 < 0) throw MeshFailure("vertex outside the enclosing triangle");
        for (int v : tris_[t0].v)
            if ((pts_[v] - p).norm() <= 1e-12 * (1.0 + std::abs(p.x()) + std::abs(p.y())))
                throw MeshFailure("duplicate mesh vertex at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ")");
        if (pts_.size() >= opt_.max_vertices + 3)
            throw MeshFailure("mesh refinement exceeded the vertex limit");

        Cavity cav = find_cavity(t0, p);
        const int v = int(pts_.size());
        pts_.push_back(p);
        input_.push_back(0);
        vtri_.push_back(-1);

        if (touched_subs) {
            for (int t : cav.tris)
                for (int i = 0; i < 3; ++i) {
                    auto it = submap_.find(edge_key(tris_[t].v[i], tris_[t].v[(i + 1) % 3]));
                    if (it != submap_.end()) touched_subs->push_back(it->second);
                }
        }

        // Back-pointer slots in outer triangles, resolved before any slot is reused.
        std::vector<int> back(cav.boundary.size(), -1);
        for (size_t k = 0; k < cav.boundary.size(); ++k) {
            const int o = cav.boundary[k].outer;
            if (o < 0) continue;
            for (int j = 0; j < 3; ++j)
                if (tris_[o].nb[j] == cav.boundary[k].inner) back[k] = j;
        }

        std::vector<int> ids;
        ids.reserve(cav.boundary.size());
        for (int t : cav.tris) ids.push_back(t);
        while (ids.size() < cav.boundary.size()) {
            if (!free_.empty()) {
                ids.push_back(free_.back());
                free_.pop_back();
            } else {
                ids.push_back(int(tris_.size()));
                tris_.push_back({{-1, -1, -1}, {-1, -1, -1}});
            }
        }
        for (size_t k = cav.boundary.size(); k < ids.size(); ++k) {
            tris_[ids[k]] = {{-1, -1, -1}, {-1, -1, -1}};
            free_.push_back(ids[k]);
        }
        ids.resize(cav.boundary.size());

        for (size_t k = 0; k < cav.boundary.size(); ++k) {
            const auto& e = cav.boundary[k];
            tris_[ids[k]] = {{e.a, e.b, v}, {-1, -1, e.outer}};
            if (e.outer >= 0) tris_[e.outer].nb[back[k]] = ids[k];
        }
        for (size_t k = 0; k < cav.boundary.size(); ++k) {
            Tri& t = tris_[ids[k]];
            for (size_t m = 0; m < cav.boundary.size(); ++m) {
                if (m == k) continue;
                const Tri& o = tris_[ids[m]];
                if (o.v[0] == t.v[1]) t.nb[0] = ids[m];  // shares edge (b, p)
                if (o.v[1] == t.v[0]) t.nb[1] = ids[m];  // shares edge (p, a)
            }
            for (int vv : t.v) vtri_[vv] = ids[k];
            queue_triangle(ids[k]);
        }
        last_ = ids.front();
        return v;
    }

    void queue_triangle(int t) {
        if (alive(t)) tri_queue_.push_back({t, tris_[t].v});
    }

    /// Triangle containing directed edge a->b (counter-clockwise), or -1.
    int find_directed_edge(int a, int b) const {
        const int start = vtri_[a];
        if (!alive(start)) return -1;
        for (int dir = 0; dir < 2; ++dir) {
            int t = start;
            for (size_t guard = 0; guard < 4096 && t >= 0; ++guard) {
                const auto& tri = tris_[t];
                int i = 0;
                while (tri.v[i] != a) ++i;
                if (tri.v[(i + 1) % 3] == b) return t;
                t = dir == 0 ? tri.nb[(i + 1) % 3] : tri.nb[(i + 2) % 3];
                if (t == start) break;
            }
        }
        return -1;
    }

    int apex(int t, int a, int b) const {
        for (int v : tris_[t].v)
            if (v != a && v != b) return v;
        return -1;
    }

    bool encroaches(const Vec2& p, int s) const {
        const Vec2& a = pts_[subs_[s].a];
        const Vec2& b = pts_[subs_[s].b];
        return (a - p).dot(b - p) < 0;
    }

    bool encroached(int s) const {
        const int a = subs_[s].a, b = subs_[s].b;
        const int t1 = find_directed_edge(a, b);
        const int t2 = find_directed_edge(b, a);
        if (t1 < 0 || t2 < 0) return true;  // not an edge yet
        for (int t : {t1, t2}) {
            const int c = apex(t, a, b);
            if (c >= kOffset && encroaches(pts_[c], s)) return true;
        }
        return false;
    }

    void split(int s) {
        Subsegment seg = subs_[s];
        const Vec2 pa = pts_[seg.a], pb = pts_[seg.b];
        const double len = (pb - pa).norm();
        if (len < 2 * opt_.min_length)
            throw MeshFailure("subsegment refinement below minimum length (near-coincident features)");

        Vec2 m = 0.5 * (pa + pb);
        if (!seg.boundary && input_[seg.a] != input_[seg.b]) {
            // Concentric shell around the input endpoint.
            const bool from_a = input_[seg.a];
            const double shell = std::exp2(std::round(std::log2(0.5 * len)));
            const double d = std::clamp(shell, 0.25 * len, 0.75 * len);
            m = from_a ? pa + (pb - pa) * (d / len) : pb + (pa - pb) * (d / len);
        }

        subs_[s].alive = false;
        submap_.erase(edge_key(seg.a, seg.b));
        std::vector<int> touched;
        const int v = insert(m, &touched);
        input_[v] = 0;
        add_segment(seg.a, v, seg.parent, seg.boundary);
        seg_queue_.push_back(int(subs_.size()) - 1);
        add_segment(v, seg.b, seg.parent, seg.boundary);
        seg_queue_.push_back(int(subs_.size()) - 1);
        for (int t : touched)
            if (t != s) seg_queue_.push_back(t);
    }

    Vec2 circumcenter(int t) const {
        const auto& v = tris_[t].v;
        const Vec2 a = pts_[v[0]], b = pts_[v[1]] - a, c = pts_[v[2]] - a;
        const double d = 2 * cross(b, c);
        const double b2 = b.squaredNorm(), c2 = c.squaredNorm();
        return a + Vec2((c.y() * b2 - b.y() * c2) / d, (b.x() * c2 - c.x() * b2) / d);
    }

    bool is_subsegment_edge(int a, int b) const { return submap_.count(edge_key(a, b)) > 0; }

    bool is_bad(int t) const {
        const auto& v = tris_[t].v;
        if (v[0] < kOffset || v[1] < kOffset || v[2] < kOffset) return false;
        const Vec2 p[3] = {pts_[v[0]], pts_[v[1]], pts_[v[2]]};
        double len[3];  // len[i] is opposite p[i]
        for (int i = 0; i < 3; ++i) len[i] = (p[(i + 1) % 3] - p[(i + 2) % 3]).norm();
        const double area2 = std::abs(cross(p[1] - p[0], p[2] - p[0]));
        const double radius = len[0] * len[1] * len[2] / (2 * area2);
        if (radius > opt_.max_edge / std::sqrt(3.0)) return true;

        // Smallest angle sits at v[k], opposite the shortest edge.
        const int k = int(std::min_element(len, len + 3) - len);
        if (len[k] / (2 * radius) >= sin_min_) return false;
        // An angle framed by two subsegments is an input angle and cannot improve.
        if (is_subsegment_edge(v[k], v[(k + 1) % 3]) && is_subsegment_edge(v[k], v[(k + 2) % 3])) return false;
        return true;
    }

    std::vector<int> encroached_by(const Vec2& c) {
        std::vector<int> out;
        const double tol = 1e-12 * std::max(bounds_.width(), bounds_.height());
        if (!bounds_.contains(c, -tol)) {
            double best = std::numeric_limits<double>::infinity();
            int nearest = -1;
            for (int s = 0; s < int(subs_.size()); ++s) {
                if (!subs_[s].alive || !subs_[s].boundary) continue;
                if (encroaches(c, s)) out.push_back(s);
                const double d = point_segment_distance(c, pts_[subs_[s].a], pts_[subs_[s].b]);
                if (d < best) {
                    best = d;
                    nearest = s;
                }
            }
            if (out.empty() && nearest >= 0) out.push_back(nearest);
            return out;
        }
        const int t0 = locate(c);
        if (t0 < 0) return out;
        Cavity cav = find_cavity(t0, c);
        for (int t : cav.tris)
            for (int i = 0; i < 3; ++i) {
                auto it = submap_.find(edge_key(tris_[t].v[i], tris_[t].v[(i + 1) % 3]));
                if (it != submap_.end() && encroaches(c, it->second) &&
                    std::find(out.begin(), out.end(), it->second) == out.end())
                    out.push_back(it->second);
            }
        return out;
    }

    Rect bounds_;
    Options opt_;
    double sin_min_;
    std::vector<Vec2> pts_;
    std::vector<char> input_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<int> vtri_;
    std::vector<Subsegment> subs_;
    std::unordered_map<uint64_t, int> submap_;
    std::deque<int> seg_queue_;
    std::deque<QueuedTri> tri_queue_;
    std::vector<unsigned> mark_;
    unsigned stamp_ = 0;
    int last_ = 0;
};

}  // namespace fracperm::detail

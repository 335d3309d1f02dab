// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

double TriangleMesh::area() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < triangles.size(); ++i) acc += face_area(static_cast<int>(i));
    return acc;
}

Aabb TriangleMesh::bounds() const {
    Aabb box = Aabb::empty();
    for (const Vec3& v : vertices) box.expand(v);
    return box;
}

Vec3 TriangleMesh::face_normal(int tri) const {
    const auto& t = triangles[tri];
    return normalized(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
}

double TriangleMesh::face_area(int tri) const {
    const auto& t = triangles[tri];
    return 0.5 * length(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
}

namespace {

// Corner offsets, bit order (x, y, z).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};

// Six tetrahedra around the 0-7 diagonal; faces of neighboring cubes share
// matching diagonals, keeping the global mesh watertight.
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
                             {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7}};

struct EdgeKeyHash {
    std::size_t operator()(uint64_t k) const { return std::hash<uint64_t>()(k); }
};

}  // namespace

TriangleMesh extract_isosurface(const SdfField& field, int resolution, const Aabb& bounds,
                                double iso) {
    if (resolution < 1) throw InputError("extract_isosurface: resolution must be >= 1");
    if (resolution > 500) throw InputError("extract_isosurface: resolution above 500 unsupported");
    const int n = resolution;            // cells per axis
    const int nv = n + 1;                // lattice nodes per axis
    Vec3 cell = bounds.extent() / static_cast<double>(n);

    auto node_pos = [&](int i, int j, int k) {
        return Vec3{bounds.min.x + i * cell.x, bounds.min.y + j * cell.y,
                    bounds.min.z + k * cell.z};
    };
    auto node_id = [&](int i, int j, int k) {
        return (static_cast<uint64_t>(k) * nv + j) * nv + i;
    };

    // Two rolling lattice layers of field values.
    std::vector<double> layer0(static_cast<std::size_t>(nv) * nv);
    std::vector<double> layer1(static_cast<std::size_t>(nv) * nv);
    auto fill_layer = [&](std::vector<double>& layer, int k) {
        for (int j = 0; j < nv; ++j)
            for (int i = 0; i < nv; ++i)
                layer[static_cast<std::size_t>(j) * nv + i] = field.value(node_pos(i, j, k));
    };
    fill_layer(layer0, 0);

    TriangleMesh mesh;
    std::unordered_map<uint64_t, int, EdgeKeyHash> edge_vertices;

    auto edge_vertex = [&](uint64_t id_a, uint64_t id_b, const Vec3& pa, const Vec3& pb,
                           double sa, double sb) {
        uint64_t lo = std::min(id_a, id_b), hi = std::max(id_a, id_b);
        if (lo != id_a) std::swap(sa, sb);  // values follow the id order
        // Node ids stay below 2^27 (resolution guard), so shift-or packs the
        // pair injectively.
        uint64_t packed = (lo << 27) | hi;
        auto it = edge_vertices.find(packed);
        if (it != edge_vertices.end()) return it->second;
        const Vec3& qa = lo == id_a ? pa : pb;
        const Vec3& qb = lo == id_a ? pb : pa;
        double denom = sb - sa;
        double t = std::abs(denom) < 1e-300 ? 0.5 : (iso - sa) / denom;
        t = std::clamp(t, 0.0, 1.0);
        Vec3 v = qa + (qb - qa) * t;
        int index = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(v);
        edge_vertices.emplace(packed, index);
        return index;
    };

    for (int k = 0; k < n; ++k) {
        fill_layer(layer1, k + 1);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double s[8];
                Vec3 p[8];
                uint64_t id[8];
                bool all_pos = true, all_neg = true;
                for (int c = 0; c < 8; ++c) {
                    int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = kCorner[c][2];
                    const std::vector<double>& layer = ck == 0 ? layer0 : layer1;
                    s[c] = layer[static_cast<std::size_t>(cj) * nv + ci];
                    p[c] = node_pos(ci, cj, k + ck);
                    id[c] = node_id(ci, cj, k + ck);
                    all_pos = all_pos && s[c] >= iso;
                    all_neg = all_neg && s[c] < iso;
                }
                if (all_pos || all_neg) continue;

                for (const auto& tet : kTets) {
                    int inside[4], n_in = 0;
                    for (int v = 0; v < 4; ++v)
                        if (s[tet[v]] < iso) inside[n_in++] = v;
                    if (n_in == 0 || n_in == 4) continue;

                    auto ev = [&](int a, int b) {
                        return edge_vertex(id[tet[a]], id[tet[b]], p[tet[a]], p[tet[b]],
                                           s[tet[a]], s[tet[b]]);
                    };
                    if (n_in == 1) {
                        int a = inside[0];
                        int o[3], m = 0;
                        for (int v = 0; v < 4; ++v)
                            if (v != a) o[m++] = v;
                        mesh.triangles.push_back({ev(a, o[0]), ev(a, o[1]), ev(a, o[2])});
                    } else if (n_in == 3) {
                        int a = -1;  // the single outside vertex
                        for (int v = 0; v < 4; ++v) {
                            bool in = false;
                            for (int q = 0; q < 3; ++q) in = in || inside[q] == v;
                            if (!in) a = v;
                        }
                        int o[3], m = 0;
                        for (int v = 0; v < 4; ++v)
                            if (v != a) o[m++] = v;
                        mesh.triangles.push_back({ev(a, o[0]), ev(a, o[1]), ev(a, o[2])});
                    } else {  // two in, two out -> quad
                        int a = inside[0], b = inside[1];
                        int o[2], m = 0;
                        for (int v = 0; v < 4; ++v)
                            if (v != a && v != b) o[m++] = v;
                        int v00 = ev(a, o[0]), v01 = ev(a, o[1]);
                        int v10 = ev(b, o[0]), v11 = ev(b, o[1]);
                        mesh.triangles.push_back({v00, v01, v11});
                        mesh.triangles.push_back({v00, v11, v10});
                    }
                }
            }
        std::swap(layer0, layer1);
    }

    remove_degenerate_triangles(mesh);

    // Orient triangles outward (along the field gradient) and attach
    // gradient normals at vertices.
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        auto& tri = mesh.triangles[t];
        Vec3 centroid = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        Vec3 g;
        field.value_and_gradient(centroid, &g);
        Vec3 fn = cross(mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
                        mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        if (dot(fn, g) < 0.0) std::swap(tri[1], tri[2]);
    }
    mesh.vertex_normals.resize(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        Vec3 g;
        field.value_and_gradient(mesh.vertices[v], &g);
        mesh.vertex_normals[v] = normalized(g);
    }
    return mesh;
}

void remove_degenerate_triangles(TriangleMesh& mesh, double min_area) {
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
        Vec3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
        if (0.5 * length(cross(b - a, c - a)) >= min_area) kept.push_back(tri);
    }
    mesh.triangles = std::move(kept);

    // Compact unreferenced vertices.
    std::vector<int> remap(mesh.vertices.size(), -1);
    std::vector<Vec3> verts;
    std::vector<Vec3> normals;
    bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    for (auto& tri : mesh.triangles)
        for (int& v : tri) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(verts.size());
                verts.push_back(mesh.vertices[v]);
                if (has_normals) normals.push_back(mesh.vertex_normals[v]);
            }
            v = remap[v];
        }
    mesh.vertices = std::move(verts);
    mesh.vertex_normals = std::move(normals);
}

void write_ply(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    out.precision(17);
    bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (has_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        out << v.x << " " << v.y << " " << v.z;
        if (has_normals) {
            const Vec3& nrm = mesh.vertex_normals[i];
            out << " " << nrm.x << " " << nrm.y << " " << nrm.z;
        }
        out << "\n";
    }
    for (const auto& tri : mesh.triangles)
        out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
}

TriangleMesh read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw InputError("not a PLY file: " + path);
    std::size_t n_vertices = 0, n_faces = 0;
    int vertex_props = 0;
    bool in_vertex_element = false, has_normals = false, ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (tok == "element") {
            std::string what;
            std::size_t count;
            ls >> what >> count;
            if (what == "vertex") {
                n_vertices = count;
                in_vertex_element = true;
            } else {
                if (what == "face") n_faces = count;
                in_vertex_element = false;
            }
        } else if (tok == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            ++vertex_props;
            if (name == "nx") has_normals = true;
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!ascii) throw InputError("only ascii PLY supported: " + path);
    TriangleMesh mesh;
    mesh.vertices.resize(n_vertices);
    if (has_normals) mesh.vertex_normals.resize(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        if (!std::getline(in, line)) throw InputError("truncated PLY: " + path);
        std::istringstream ls(line);
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (vals.size() < 3) throw InputError("bad PLY vertex line: " + path);
        mesh.vertices[i] = {vals[0], vals[1], vals[2]};
        if (has_normals && vals.size() >= 6) mesh.vertex_normals[i] = {vals[3], vals[4], vals[5]};
    }
    mesh.triangles.reserve(n_faces);
    for (std::size_t i = 0; i < n_faces; ++i) {
        if (!std::getline(in, line)) throw InputError("truncated PLY: " + path);
        std::istringstream ls(line);
        int cnt;
        ls >> cnt;
        std::vector<int> idx(cnt);
        for (int& ix : idx) ls >> ix;
        for (int f = 2; f < cnt; ++f)
            mesh.triangles.push_back({idx[0], idx[f - 1], idx[f]});
    }
    for (const auto& tri : mesh.triangles)
        for (int v : tri)
            if (v < 0 || v >= static_cast<int>(mesh.vertices.size()))
                throw InputError("PLY face index out of range: " + path);
    return mesh;
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        out << "v " << v.x << " " << v.y << " " << v.z << "\n";
    }
    if (has_normals)
        for (const Vec3& nrm : mesh.vertex_normals)
            out << "vn " << nrm.x << " " << nrm.y << " " << nrm.z << "\n";
    for (const auto& tri : mesh.triangles) {
        if (has_normals)
            out << "f " << tri[0] + 1 << "//" << tri[0] + 1 << " " << tri[1] + 1 << "//"
                << tri[1] + 1 << " " << tri[2] + 1 << "//" << tri[2] + 1 << "\n";
        else
            out << "f " << tri[0] + 1 << " " << tri[1] + 1 << " " << tri[2] + 1 << "\n";
    }
}

PointCloud sample_points(const TriangleMesh& mesh, int n, Rng& rng) {
    PointCloud cloud;
    if (mesh.triangles.empty() || n <= 0) return cloud;
    std::vector<double> cum(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        total += mesh.face_area(static_cast<int>(i));
        cum[i] = total;
    }
    if (total <= 0.0) return cloud;
    bool has_normals = mesh.vertex_normals.size() == mesh.vertices.size();
    cloud.points.reserve(n);
    cloud.normals.reserve(n);
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform() * total;
        auto it = std::lower_bound(cum.begin(), cum.end(), u);
        std::size_t tri = std::min(static_cast<std::size_t>(it - cum.begin()),
                                   mesh.triangles.size() - 1);
        const auto& tv = mesh.triangles[tri];
        double r1 = std::sqrt(rng.uniform());
        double r2 = rng.uniform();
        double a = 1.0 - r1, b = r1 * (1.0 - r2), c = r1 * r2;
        Vec3 p = mesh.vertices[tv[0]] * a + mesh.vertices[tv[1]] * b + mesh.vertices[tv[2]] * c;
        Vec3 nrm;
        if (has_normals) {
            nrm = normalized(mesh.vertex_normals[tv[0]] * a + mesh.vertex_normals[tv[1]] * b +
                             mesh.vertex_normals[tv[2]] * c);
        }
        if (!has_normals || length(nrm) < 0.5)
            nrm = mesh.face_normal(static_cast<int>(tri));
        cloud.points.push_back(p);
        cloud.normals.push_back(nrm);
    }
    return cloud;
}

}  // namespace sdfrecon

#include "itpcc/ply.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace itpcc {

namespace {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::i8:
        case PlyType::u8: return 1;
        case PlyType::i16:
        case PlyType::u16: return 2;
        case PlyType::i32:
        case PlyType::u32:
        case PlyType::f32: return 4;
        case PlyType::f64: return 8;
    }
    return 0;
}

PlyType parse_type(const std::string& s) {
    if (s == "char" || s == "int8") return PlyType::i8;
    if (s == "uchar" || s == "uint8") return PlyType::u8;
    if (s == "short" || s == "int16") return PlyType::i16;
    if (s == "ushort" || s == "uint16") return PlyType::u16;
    if (s == "int" || s == "int32") return PlyType::i32;
    if (s == "uint" || s == "uint32") return PlyType::u32;
    if (s == "float" || s == "float32") return PlyType::f32;
    if (s == "double" || s == "float64") return PlyType::f64;
    throw std::runtime_error("ply: unsupported property type " + s);
}

double read_binary_value(std::istream& in, PlyType t) {
    char buf[8];
    in.read(buf, std::streamsize(type_size(t)));
    if (!in) throw std::runtime_error("ply: truncated binary payload");
    switch (t) {
        case PlyType::i8: return double(int8_t(buf[0]));
        case PlyType::u8: return double(uint8_t(buf[0]));
        case PlyType::i16: { int16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::u16: { uint16_t v; std::memcpy(&v, buf, 2); return v; }
        case PlyType::i32: { int32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::u32: { uint32_t v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::f32: { float v; std::memcpy(&v, buf, 4); return v; }
        case PlyType::f64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
}

int32_t round_coord(double v) {
    if (!std::isfinite(v)) throw std::runtime_error("ply: non-finite coordinate");
    double r = v < 0 ? std::ceil(v - 0.5) : std::floor(v + 0.5);
    if (r < 0) throw std::runtime_error("ply: negative coordinate after rounding");
    return int32_t(r);
}

struct Property {
    std::string name;
    PlyType type;
};

}  // namespace

PointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("ply: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ply: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") throw std::runtime_error("ply: missing magic");

    bool ascii = false;
    bool format_seen = false;
    size_t vertex_count = 0;
    std::vector<Property> props;
    bool in_vertex_element = false;
    bool header_done = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "ascii") ascii = true;
            else if (fmt == "binary_little_endian") ascii = false;
            else throw std::runtime_error("ply: unsupported format " + fmt);
            format_seen = true;
        } else if (tok == "element") {
            std::string name;
            size_t count;
            ls >> name >> count;
            if (name == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
            } else {
                if (count != 0)
                    throw std::runtime_error("ply: unsupported element " + name);
                in_vertex_element = false;
            }
        } else if (tok == "property") {
            if (!in_vertex_element) continue;
            std::string type, name;
            ls >> type;
            if (type == "list") throw std::runtime_error("ply: list property on vertex");
            ls >> name;
            props.push_back({name, parse_type(type)});
        } else if (tok == "end_header") {
            header_done = true;
            break;
        } else {
            throw std::runtime_error("ply: unexpected header token " + tok);
        }
    }
    if (!header_done || !format_seen) throw std::runtime_error("ply: malformed header");

    int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
    for (size_t i = 0; i < props.size(); ++i) {
        const std::string& n = props[i].name;
        if (n == "x") ix = int(i);
        else if (n == "y") iy = int(i);
        else if (n == "z") iz = int(i);
        else if (n == "red" || n == "r") ir = int(i);
        else if (n == "green" || n == "g") ig = int(i);
        else if (n == "blue" || n == "b") ib = int(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw std::runtime_error("ply: missing x/y/z properties");
    bool with_color = ir >= 0 && ig >= 0 && ib >= 0;

    std::vector<Vec3i> points;
    std::vector<Rgb> colors;
    points.reserve(vertex_count);
    if (with_color) colors.reserve(vertex_count);
    std::vector<double> row(props.size());

    for (size_t v = 0; v < vertex_count; ++v) {
        if (ascii) {
            for (auto& r : row)
                if (!(in >> r)) throw std::runtime_error("ply: truncated ascii payload");
        } else {
            for (size_t i = 0; i < props.size(); ++i)
                row[i] = read_binary_value(in, props[i].type);
        }
        points.push_back({round_coord(row[ix]), round_coord(row[iy]),
                          round_coord(row[iz])});
        if (with_color)
            colors.push_back({uint8_t(row[ir]), uint8_t(row[ig]), uint8_t(row[ib])});
    }
    return make_cloud(std::move(points), std::move(colors));
}

void save_ply(const PointCloud& pc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("ply: cannot write " + path);
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << pc.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (pc.has_colors())
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "end_header\n";
    for (size_t i = 0; i < pc.points.size(); ++i) {
        float xyz[3] = {float(pc.points[i][0]), float(pc.points[i][1]),
                        float(pc.points[i][2])};
        out.write(reinterpret_cast<const char*>(xyz), 12);
        if (pc.has_colors())
            out.write(reinterpret_cast<const char*>(pc.colors[i].data()), 3);
    }
    if (!out) throw std::runtime_error("ply: write failed for " + path);
}

}  // namespace itpcc

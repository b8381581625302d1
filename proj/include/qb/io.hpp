#pragma once

// JSON persistence for every artifact, plus the small text formats of the
// command line: complex literals "a+bi", grids "u1=-1:1:21,...", and CSV.
// Complex numbers are [re, im]; matrices are row-major nested arrays. Objects
// are ordered_json so re-serialization reproduces the same bytes.

#include "qb/lattice.hpp"
#include "qb/soliton.hpp"
#include "qb/verify.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qb::io {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::InvalidInput, what); }

inline const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

}  // namespace detail

// Scalars, vectors, matrices --------------------------------------------------

inline Json to_json(Complex c) { return Json::array({c.real(), c.imag()}); }

inline Complex complex_from_json(const Json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        detail::bad("complex number must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Json to_json(const CVector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v(i)));
    return out;
}

inline CVector vector_from_json(const Json& j) {
    if (!j.is_array()) detail::bad("expected an array of complex numbers");
    CVector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
    return v;
}

inline Json to_json(const CMatrix& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(to_json(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

inline CMatrix matrix_from_json(const Json& j) {
    if (!j.is_array()) detail::bad("matrix must be an array of rows");
    const auto rows = j.size();
    const auto cols = rows ? j[0].size() : 0;
    CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) detail::bad("matrix rows must have equal length");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_from_json(j[r][c]);
    }
    return m;
}

// Domain objects --------------------------------------------------------------

inline Json to_json(const QuadricSpec& spec) {
    Json a = Json::array();
    for (const auto& aj : spec.a()) a.push_back(to_json(aj));
    return Json{{"n", spec.n()}, {"a", a}};
}

inline QuadricSpec spec_from_json(const Json& j) {
    const int n = detail::field(j, "n").get<int>();
    const CVector a = vector_from_json(detail::field(j, "a"));
    if (a.size() != n) detail::bad("quadric: \"a\" must have n entries");
    return QuadricSpec(std::vector<Complex>(a.data(), a.data() + a.size()));
}

/// "sqrt_z" is written only for the non-principal branch.
inline Json to_json(const SpectralParam& zp) {
    Json j{{"z", to_json(zp.z())}};
    if (!zp.principal()) j["sqrt_z"] = to_json(zp.sqrt_z());
    return j;
}

inline SpectralParam spectral_from_json(const QuadricSpec& spec, const Json& j) {
    const Complex z = complex_from_json(detail::field(j, "z"));
    if (j.contains("sqrt_z")) return SpectralParam(spec, z, complex_from_json(j.at("sqrt_z")));
    return SpectralParam(spec, z);
}

inline Json to_json(const CoefficientSet& c) {
    Json seed = Json::array();
    for (int j = 0; j < c.n; ++j) seed.push_back(Json::array({to_json(c.seed_c1(j)), to_json(c.seed_c2(j))}));
    Json hom = Json::array();
    for (int l = 0; l < c.ambient_dim(); ++l) {
        Json row = Json::array();
        for (int j = 0; j < c.n; ++j) row.push_back(Json::array({to_json(c.hom_c1(l, j)), to_json(c.hom_c2(l, j))}));
        hom.push_back(std::move(row));
    }
    return Json{{"n", c.n}, {"seed_c", seed}, {"hom_c", hom}, {"offsets", to_json(c.offsets)}, {"mu", to_json(c.mu)}};
}

inline CoefficientSet coefficients_from_json(const Json& j) {
    CoefficientSet c;
    c.n = detail::field(j, "n").get<int>();
    if (c.n < 2) detail::bad("coefficients: n must be >= 2");
    const int m = 2 * c.n - 1;
    const Json& seed = detail::field(j, "seed_c");
    const Json& hom = detail::field(j, "hom_c");
    if (!seed.is_array() || static_cast<int>(seed.size()) != c.n) detail::bad("coefficients: seed_c needs n pairs");
    if (!hom.is_array() || static_cast<int>(hom.size()) != m) detail::bad("coefficients: hom_c needs 2n-1 rows");
    c.seed = CVector(2 * c.n);
    c.hom = CMatrix(2 * c.n, m);
    const auto pair = [](const Json& p) {
        if (!p.is_array() || p.size() != 2) detail::bad("coefficients: expected a pair [c1, c2]");
        return std::pair{complex_from_json(p[0]), complex_from_json(p[1])};
    };
    for (int jj = 0; jj < c.n; ++jj) std::tie(c.seed(2 * jj), c.seed(2 * jj + 1)) = pair(seed[static_cast<std::size_t>(jj)]);
    for (int l = 0; l < m; ++l) {
        const Json& row = hom[static_cast<std::size_t>(l)];
        if (!row.is_array() || static_cast<int>(row.size()) != c.n) detail::bad("coefficients: hom_c rows need n pairs");
        for (int jj = 0; jj < c.n; ++jj)
            std::tie(c.hom(2 * jj, l), c.hom(2 * jj + 1, l)) = pair(row[static_cast<std::size_t>(jj)]);
    }
    c.offsets = vector_from_json(detail::field(j, "offsets"));
    c.mu = vector_from_json(detail::field(j, "mu"));
    if (c.offsets.size() != m) detail::bad("coefficients: offsets needs 2n-1 entries");
    if (c.mu.size() != c.n) detail::bad("coefficients: mu needs n entries");
    return c;
}

/// Seed file: the quadric and its Peterson coefficients.
struct SeedFile {
    QuadricSpec spec;
    CoefficientSet coefficients;
};

inline Json to_json(const SeedFile& s) {
    return Json{{"spec", to_json(s.spec)}, {"coefficients", to_json(s.coefficients)}};
}

inline SeedFile seed_from_json(const Json& j) {
    SeedFile s{spec_from_json(detail::field(j, "spec")), coefficients_from_json(detail::field(j, "coefficients"))};
    if (s.coefficients.n != s.spec.n()) detail::bad("seed: coefficients do not match the quadric");
    return s;
}

inline Json to_json(const BacklundParam& p) {
    Json j = to_json(p.zp);
    j["W"] = to_json(p.W());
    bool standard = true;
    for (Eigen::Index k = 0; k < p.form.diag0.size(); ++k)
        if (p.form.diag0(k) != Complex(-0.5, 0.0)) standard = false;
    if (!standard) j["diag0"] = to_json(p.form.diag0);
    return j;
}

inline BacklundParam backlund_from_json(const QuadricSpec& spec, const Json& j) {
    const SpectralParam zp = spectral_from_json(spec, j);
    std::optional<CVector> diag0;
    if (j.contains("diag0")) diag0 = vector_from_json(j.at("diag0"));
    return make_backlund_param(spec, zp, matrix_from_json(detail::field(j, "W")), diag0);
}

inline Json to_json(const ZStep& s) {
    Json j = to_json(s.zp);
    j["W"] = to_json(s.W);
    if (s.diag0) j["diag0"] = to_json(*s.diag0);
    return j;
}

inline ZStep zstep_from_json(const QuadricSpec& spec, const Json& j) {
    ZStep s{spectral_from_json(spec, j), matrix_from_json(detail::field(j, "W")), std::nullopt};
    if (j.contains("diag0")) s.diag0 = vector_from_json(j.at("diag0"));
    return s;
}

inline Json to_json(const SolitonParam& p) {
    return Json{{"sigma", to_json(p.sigma)}, {"n", p.n}, {"W", to_json(p.W)}};
}

inline SolitonParam soliton_from_json(const Json& j) {
    SolitonParam p{complex_from_json(detail::field(j, "sigma")), detail::field(j, "n").get<int>(),
                   matrix_from_json(detail::field(j, "W"))};
    if (p.W.rows() != p.n || p.W.cols() != p.n) detail::bad("soliton: W must be n x n");
    return p;
}

/// Lattice file: quadric, seed coefficients and the node list with parent links.
inline Json to_json(const Lattice& lattice) {
    Json nodes = Json::array();
    for (const auto& r : lattice.records()) {
        Json path = Json::array();
        for (const auto& s : r.z_path) path.push_back(to_json(s));
        Json node{{"z_path", path}, {"parent", nullptr}, {"id", r.id}};
        if (r.parent) node["parent"] = *r.parent;
        nodes.push_back(std::move(node));
    }
    return Json{{"spec", to_json(lattice.spec())}, {"seed", to_json(lattice.coefficients())}, {"nodes", nodes}};
}

/// Rebuilds every node from its z-path. Ids in the file must match the order
/// in which the nodes are rebuilt.
inline Lattice lattice_from_json(const Json& j, const ToleranceConfig& tol = {}) {
    const QuadricSpec spec = spec_from_json(detail::field(j, "spec"));
    CoefficientSet coeffs = coefficients_from_json(detail::field(j, "seed"));
    if (coeffs.n != spec.n()) detail::bad("lattice: seed does not match the quadric");
    Lattice lattice(spec, std::move(coeffs), tol);
    const Json& nodes = detail::field(j, "nodes");
    if (!nodes.is_array()) detail::bad("lattice: nodes must be an array");
    for (const auto& node : nodes) {
        std::vector<ZStep> path;
        for (const auto& s : detail::field(node, "z_path")) path.push_back(zstep_from_json(spec, s));
        const int id = lattice.ensure(path);
        if (detail::field(node, "id").get<int>() != id) detail::bad("lattice: node ids out of construction order");
        const Json& parent = detail::field(node, "parent");
        const auto& rec = lattice.records()[static_cast<std::size_t>(id)];
        const bool parent_ok = parent.is_null() ? !rec.parent : (rec.parent && parent.get<int>() == *rec.parent);
        if (!parent_ok) detail::bad("lattice: parent link of node " + std::to_string(id) + " does not match its z_path");
    }
    return lattice;
}

inline Json to_json(const VerificationReport& rep) {
    Json checks = Json::array();
    for (const auto& c : rep.checks) {
        Json u = Json::array();
        for (double x : c.u) u.push_back(x);
        // NaN is not representable in JSON; a failed evaluation is reported as null.
        Json residual = std::isfinite(c.residual) ? Json(c.residual) : Json(nullptr);
        checks.push_back(Json{{"name", c.name}, {"residual", residual}, {"tol", c.tol}, {"pass", c.pass}, {"u", u}});
    }
    return Json{{"checks", checks}, {"overall", rep.overall()}};
}

// Files -----------------------------------------------------------------------

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) detail::bad("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        detail::bad(path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) detail::bad("cannot write " + path);
    out << text;
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, dump(j)); }

// Command-line literals --------------------------------------------------------

namespace detail {

inline double parse_real(std::string_view s, const std::string& whole) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) bad("malformed number \"" + whole + "\"");
    return v;
}

inline std::string strip(std::string_view s) {
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '\t') out.push_back(c);
    return out;
}

}  // namespace detail

/// "1", "-2.5i", "i", "1-0.5i", "3e-2+1e1i".
inline Complex parse_complex(std::string_view text) {
    const std::string s = detail::strip(text);
    if (s.empty()) detail::bad("empty complex literal");
    if (s.back() != 'i' && s.back() != 'j') return {detail::parse_real(s, s), 0.0};

    const std::string_view body(s.data(), s.size() - 1);
    std::size_t split = std::string_view::npos;
    for (std::size_t k = body.size(); k-- > 1;)
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    const std::string_view re = split == std::string_view::npos ? std::string_view() : body.substr(0, split);
    std::string_view im = split == std::string_view::npos ? body : body.substr(split);
    double imv = 0;
    if (im.empty() || im == "+") imv = 1.0;
    else if (im == "-") imv = -1.0;
    else imv = detail::parse_real(im, s);
    return {re.empty() ? 0.0 : detail::parse_real(re, s), imv};
}

inline std::vector<Complex> parse_complex_list(std::string_view text) {
    std::vector<Complex> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find(',', start);
        const auto token = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        out.push_back(parse_complex(token));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

struct GridAxis {
    std::string name;
    double start = 0;
    double stop = 0;
    int count = 1;

    double at(int i) const { return count == 1 ? start : start + (stop - start) * i / (count - 1); }
};

struct GridSpec {
    std::vector<GridAxis> axes;

    int dim() const { return static_cast<int>(axes.size()); }

    std::size_t size() const {
        std::size_t s = 1;
        for (const auto& a : axes) s *= static_cast<std::size_t>(a.count);
        return s;
    }

    Point lo() const {
        Point p(dim());
        for (int j = 0; j < dim(); ++j) p(j) = axes[static_cast<std::size_t>(j)].start;
        return p;
    }

    Point hi() const {
        Point p(dim());
        for (int j = 0; j < dim(); ++j) p(j) = axes[static_cast<std::size_t>(j)].stop;
        return p;
    }

    /// Lexicographic in the grid indices, last axis fastest.
    Point point(std::size_t index) const {
        Point p(dim());
        for (int j = dim() - 1; j >= 0; --j) {
            const auto& a = axes[static_cast<std::size_t>(j)];
            p(j) = a.at(static_cast<int>(index % static_cast<std::size_t>(a.count)));
            index /= static_cast<std::size_t>(a.count);
        }
        return p;
    }
};

/// "u1=-1:1:21,u2=-1:1:21".
inline GridSpec parse_grid(std::string_view text) {
    const std::string s = detail::strip(text);
    GridSpec g;
    std::size_t start = 0;
    while (start < s.size()) {
        auto end = s.find(',', start);
        if (end == std::string::npos) end = s.size();
        const std::string token = s.substr(start, end - start);
        const auto eq = token.find('=');
        const auto c1 = token.find(':', eq == std::string::npos ? 0 : eq);
        const auto c2 = c1 == std::string::npos ? std::string::npos : token.find(':', c1 + 1);
        if (eq == std::string::npos || eq == 0 || c1 == std::string::npos || c2 == std::string::npos ||
            token.find(':', c2 + 1) != std::string::npos)
            detail::bad("malformed grid axis \"" + token + "\" (expected name=start:stop:count)");
        GridAxis a;
        a.name = token.substr(0, eq);
        a.start = detail::parse_real(std::string_view(token).substr(eq + 1, c1 - eq - 1), token);
        a.stop = detail::parse_real(std::string_view(token).substr(c1 + 1, c2 - c1 - 1), token);
        const std::string count = token.substr(c2 + 1);
        const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), a.count);
        if (ec != std::errc() || ptr != count.data() + count.size()) detail::bad("malformed grid count in \"" + token + "\"");
        if (a.count < 1) detail::bad("grid count must be >= 1");
        if (!(a.start <= a.stop)) detail::bad("grid start must not exceed stop");
        g.axes.push_back(a);
        start = end + 1;
    }
    if (g.axes.empty()) detail::bad("empty grid");
    return g;
}

// CSV ------------------------------------------------------------------------

inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Rows of reals with a header; one line per row.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { line(header); }

    void row(const std::vector<double>& values) {
        if (values.size() != width_) detail::bad("csv row has the wrong width");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_real(v));
        line(cells);
    }

    const std::string& str() const { return text_; }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    std::size_t width_;
    std::string text_;
};

}  // namespace qb::io

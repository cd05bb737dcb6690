#include "rhfe/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rhfe::io {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'H', 'F', 'E', 'M', 'A', 'T', '\0'};

template <typename T>
void put_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) fail(ErrorCode::Io, "truncated sidecar record");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

json mat_json(const Matrix& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix json_mat(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        fail(ErrorCode::Io, "matrix '" + what + "' needs rows, cols and data");
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& d = j.at("data");
    if (r < 0 || c < 0 || !d.is_array() || static_cast<Eigen::Index>(d.size()) != r * c)
        fail(ErrorCode::Io, "matrix '" + what + "' has inconsistent dimensions");
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = d[static_cast<std::size_t>(i * c + k)].get<double>();
    return m;
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorCode::Io, what + ": " + e.what());
    }
}

std::string sidecar_path(const std::string& json_path) {
    std::filesystem::path p(json_path);
    p.replace_extension(".bin");
    return p.string();
}

std::string sidecar_ref(const std::string& json_path) {
    return std::filesystem::path(sidecar_path(json_path)).filename().string();
}

std::string resolve_sidecar(const std::string& json_path, const std::string& ref) {
    return (std::filesystem::path(json_path).parent_path() / ref).string();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

std::vector<int> parse_channels(const std::string& list, const std::string& spec) {
    std::vector<int> out;
    for (const auto& tok : split(list, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
            out.push_back(v - 1);
        } catch (const std::exception&) {
            fail(ErrorCode::InvalidArgument, "bad channel '" + tok + "' in fault spec '" + spec + "'");
        }
    }
    if (out.empty()) fail(ErrorCode::InvalidArgument, "fault spec '" + spec + "' lists no channels");
    return out;
}

}  // namespace

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_matrix_record(std::ostream& os, const Matrix& m) {
    os.write(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_le<double>(os, m(i, j));
}

Matrix read_matrix_record(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof magic)) fail(ErrorCode::Io, "truncated sidecar header");
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) fail(ErrorCode::Io, "bad sidecar magic");
    const auto r = get_le<std::uint32_t>(is);
    const auto c = get_le<std::uint32_t>(is);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_le<double>(is);
    return m;
}

void write_sidecar(const std::string& path, const std::vector<Matrix>& mats) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot write " + path);
    for (const auto& m : mats) write_matrix_record(os, m);
    if (!os) fail(ErrorCode::Io, "write failed for " + path);
}

std::vector<Matrix> read_sidecar(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open " + path);
    std::vector<Matrix> out;
    while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_matrix_record(is));
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot write " + path);
    os << text;
    if (!os) fail(ErrorCode::Io, "write failed for " + path);
}

// ---- model -------------------------------------------------------------------

std::string model_to_json(const StateSpaceModel& model, const Matrix* Ky) {
    json j;
    j["n"] = model.n();
    j["nu"] = model.nu();
    j["ny"] = model.ny();
    j["nw"] = model.nw();
    j["A"] = mat_json(model.A());
    j["B"] = mat_json(model.B());
    j["C"] = mat_json(model.C());
    j["D"] = mat_json(model.D());
    j["F"] = mat_json(model.F());
    j["Q"] = mat_json(model.Q());
    j["R"] = mat_json(model.R());
    j["unit_circle_tol"] = model.checks().unit_circle_tol;
    if (Ky) j["Ky"] = mat_json(*Ky);
    return j.dump(1);
}

ModelFile model_from_json(const std::string& text) {
    const json j = parse_json(text, "model file");
    for (const char* key : {"A", "B", "C", "D", "F", "Q", "R"})
        if (!j.contains(key)) fail(ErrorCode::Io, std::string("model file lacks '") + key + "'");
    ModelChecks checks;
    if (j.contains("unit_circle_tol")) checks.unit_circle_tol = j.at("unit_circle_tol").get<double>();
    StateSpaceModel model(json_mat(j["A"], "A"), json_mat(j["B"], "B"), json_mat(j["C"], "C"),
                          json_mat(j["D"], "D"), json_mat(j["F"], "F"), json_mat(j["Q"], "Q"),
                          json_mat(j["R"], "R"), checks);
    ModelFile mf{std::move(model), std::nullopt};
    if (j.contains("Ky")) {
        Matrix Ky = json_mat(j["Ky"], "Ky");
        if (Ky.rows() != mf.model.nu() || Ky.cols() != mf.model.ny())
            fail(ErrorCode::InvalidModel, "Ky must be n_u x n_y");
        mf.Ky = std::move(Ky);
    }
    return mf;
}

ModelFile load_model(const std::string& path) { return model_from_json(read_file(path)); }

void save_model(const std::string& path, const StateSpaceModel& model, const Matrix* Ky) {
    write_file(path, model_to_json(model, Ky));
}

// ---- identification ------------------------------------------------------------

void save_identification(const std::string& json_path, const MarkovSet& ms, const FaultConfig& cfg) {
    json j;
    j["p"] = ms.p;
    j["n_bar"] = ms.n_bar;
    j["nu"] = ms.nu();
    j["ny"] = ms.ny();
    j["fault"] = fault_to_string(cfg);
    j["Sigma_e_hat"] = mat_json(ms.Sigma_e);
    for (const char* key : {"Hu", "Hy", "Hf"}) j[key] = json::array();
    for (const auto& H : ms.Hu) j["Hu"].push_back(mat_json(H));
    for (const auto& H : ms.Hy) j["Hy"].push_back(mat_json(H));
    for (const auto& H : ms.Hf) j["Hf"].push_back(mat_json(H));
    std::vector<Matrix> side;
    if (ms.has_sensitivities()) {
        j["M_blocks"] = {{"file", sidecar_ref(json_path)},
                         {"order", {"Mu", "My", "Mf"}},
                         {"counts", {ms.Mu.size(), ms.My.size(), ms.Mf.size()}}};
        side.insert(side.end(), ms.Mu.begin(), ms.Mu.end());
        side.insert(side.end(), ms.My.begin(), ms.My.end());
        side.insert(side.end(), ms.Mf.begin(), ms.Mf.end());
        write_sidecar(sidecar_path(json_path), side);
    }
    write_file(json_path, j.dump(1));
}

MarkovSet load_identification(const std::string& json_path, FaultConfig* cfg) {
    const json j = parse_json(read_file(json_path), json_path);
    for (const char* key : {"p", "n_bar", "Sigma_e_hat", "Hu", "Hy", "Hf", "fault"})
        if (!j.contains(key)) fail(ErrorCode::Io, std::string("identification file lacks '") + key + "'");
    MarkovSet ms;
    ms.p = j["p"].get<int>();
    ms.n_bar = j["n_bar"].get<int>();
    ms.Sigma_e = json_mat(j["Sigma_e_hat"], "Sigma_e_hat");
    for (const auto& H : j["Hu"]) ms.Hu.push_back(json_mat(H, "Hu"));
    for (const auto& H : j["Hy"]) ms.Hy.push_back(json_mat(H, "Hy"));
    for (const auto& H : j["Hf"]) ms.Hf.push_back(json_mat(H, "Hf"));
    if (ms.Hu.empty() || ms.Hu.size() != ms.Hy.size() || ms.Hu.size() != ms.Hf.size())
        fail(ErrorCode::Io, "identification file has inconsistent H block counts");
    if (j.contains("M_blocks")) {
        const auto& mb = j["M_blocks"];
        const auto side = read_sidecar(resolve_sidecar(json_path, mb.at("file").get<std::string>()));
        const auto counts = mb.at("counts").get<std::vector<std::size_t>>();
        if (counts.size() != 3 || counts[0] + counts[1] + counts[2] != side.size())
            fail(ErrorCode::Io, "sidecar record count does not match the JSON header");
        auto it = side.begin();
        ms.Mu.assign(it, it + static_cast<std::ptrdiff_t>(counts[0]));
        it += static_cast<std::ptrdiff_t>(counts[0]);
        ms.My.assign(it, it + static_cast<std::ptrdiff_t>(counts[1]));
        it += static_cast<std::ptrdiff_t>(counts[1]);
        ms.Mf.assign(it, it + static_cast<std::ptrdiff_t>(counts[2]));
    }
    if (cfg) *cfg = parse_fault(j["fault"].get<std::string>());
    return ms;
}

// ---- estimator -------------------------------------------------------------------

void save_estimator(const std::string& json_path, const EstimatorGain& g) {
    json j;
    j["kind"] = to_string(g.kind);
    j["L"] = g.L;
    j["m"] = g.m;
    j["tau"] = g.tau;
    j["n_f"] = g.n_f();
    j["gamma_f2"] = std::isnan(g.gamma_f2) ? json(nullptr) : json(g.gamma_f2);
    j["gamma_z2"] = std::isnan(g.gamma_z2) ? json(nullptr) : json(g.gamma_z2);
    j["solver_status"] = g.solver_status;
    j["matrices"] = {
        {"file", sidecar_ref(json_path)},
        {"order", {"Gmat", "Ty", "Tu"}},
        {"Gmat", {g.Gmat.rows(), g.Gmat.cols()}},
        {"Ty", {g.Ty.rows(), g.Ty.cols()}},
        {"Tu", {g.Tu.rows(), g.Tu.cols()}},
    };
    write_sidecar(sidecar_path(json_path), {g.Gmat, g.Ty, g.Tu});
    write_file(json_path, j.dump(1));
}

EstimatorGain load_estimator(const std::string& json_path) {
    const json j = parse_json(read_file(json_path), json_path);
    for (const char* key : {"kind", "L", "m", "tau", "matrices"})
        if (!j.contains(key)) fail(ErrorCode::Io, std::string("estimator file lacks '") + key + "'");
    EstimatorGain g;
    g.kind = gain_kind_from_string(j["kind"].get<std::string>());
    g.L = j["L"].get<int>();
    g.m = j["m"].get<int>();
    g.tau = j["tau"].get<int>();
    if (j.contains("gamma_f2") && !j["gamma_f2"].is_null()) g.gamma_f2 = j["gamma_f2"].get<double>();
    if (j.contains("gamma_z2") && !j["gamma_z2"].is_null()) g.gamma_z2 = j["gamma_z2"].get<double>();
    if (j.contains("solver_status")) g.solver_status = j["solver_status"].get<std::string>();
    const auto& mj = j["matrices"];
    const auto side = read_sidecar(resolve_sidecar(json_path, mj.at("file").get<std::string>()));
    if (side.size() != 3) fail(ErrorCode::Io, "estimator sidecar must hold Gmat, Ty and Tu");
    g.Gmat = side[0];
    g.Ty = side[1];
    g.Tu = side[2];
    const char* names[3] = {"Gmat", "Ty", "Tu"};
    for (int i = 0; i < 3; ++i) {
        const auto dims = mj.at(names[i]).get<std::vector<Eigen::Index>>();
        if (dims.size() != 2 || dims[0] != side[static_cast<std::size_t>(i)].rows() ||
            dims[1] != side[static_cast<std::size_t>(i)].cols())
            fail(ErrorCode::Io, std::string("sidecar dimensions of ") + names[i] + " disagree with the header");
    }
    return g;
}

// ---- trajectories ----------------------------------------------------------------

std::string trajectory_csv(const TrajectoryDataset& traj) {
    std::ostringstream os;
    os << "k";
    for (Eigen::Index i = 0; i < traj.u.cols(); ++i) os << ",u" << i + 1;
    for (Eigen::Index i = 0; i < traj.y.cols(); ++i) os << ",y" << i + 1;
    for (Eigen::Index i = 0; i < traj.f.cols(); ++i) os << ",f" << i + 1;
    for (Eigen::Index i = 0; i < traj.eta.cols(); ++i) os << ",eta" << i + 1;
    os << "\n";
    for (int k = 0; k < traj.length(); ++k) {
        os << k;
        for (const Matrix* m : {&traj.u, &traj.y, &traj.f, &traj.eta})
            for (Eigen::Index i = 0; i < m->cols(); ++i) os << ',' << fmt((*m)(k, i));
        os << "\n";
    }
    return os.str();
}

TrajectoryDataset parse_trajectory_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::Io, "empty trajectory file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line, ',');
    if (header.empty() || header[0] != "k") fail(ErrorCode::Io, "trajectory header must start with 'k'");
    int counts[4] = {0, 0, 0, 0};
    const char* prefixes[4] = {"u", "y", "f", "eta"};
    int group = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& h = header[c];
        while (group < 4) {
            const std::string pre = prefixes[group];
            if (h == pre + std::to_string(counts[group] + 1)) break;
            ++group;
        }
        if (group == 4) fail(ErrorCode::Io, "unexpected trajectory column '" + h + "'");
        ++counts[group];
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) fail(ErrorCode::Io, "ragged trajectory row");
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                row.push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                fail(ErrorCode::Io, "bad number '" + cells[c] + "' in trajectory");
            }
        }
        if (std::stol(cells[0]) != static_cast<long>(rows.size()))
            fail(ErrorCode::Io, "trajectory rows must be numbered 0, 1, 2, ...");
        rows.push_back(std::move(row));
    }
    TrajectoryDataset traj;
    const auto T = static_cast<Eigen::Index>(rows.size());
    Matrix* mats[4] = {&traj.u, &traj.y, &traj.f, &traj.eta};
    int offset = 0;
    for (int g = 0; g < 4; ++g) {
        mats[g]->resize(T, counts[g]);
        for (Eigen::Index k = 0; k < T; ++k)
            for (int i = 0; i < counts[g]; ++i)
                (*mats[g])(k, i) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(offset + i)];
        offset += counts[g];
    }
    return traj;
}

void save_trajectory(const std::string& path, const TrajectoryDataset& traj) {
    write_file(path, trajectory_csv(traj));
}

TrajectoryDataset load_trajectory(const std::string& path) { return parse_trajectory_csv(read_file(path)); }

std::string estimates_csv(const Matrix& est) {
    std::ostringstream os;
    os << "k";
    for (Eigen::Index i = 0; i < est.cols(); ++i) os << ",fhat" << i + 1;
    os << "\n";
    for (Eigen::Index k = 0; k < est.rows(); ++k) {
        os << k;
        for (Eigen::Index i = 0; i < est.cols(); ++i) os << ',' << fmt(est(k, i));
        os << "\n";
    }
    return os.str();
}

// ---- fault specs --------------------------------------------------------------------

FaultConfig parse_fault(const std::string& spec) {
    FaultConfig cfg;
    for (const auto& part : split(spec, ';')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            fail(ErrorCode::InvalidArgument, "fault spec '" + spec + "' must look like sensor:J, actuator:L or both:J,L");
        const std::string kind = part.substr(0, colon);
        const auto channels = parse_channels(part.substr(colon + 1), spec);
        if (kind == "sensor") {
            cfg.sensors.insert(cfg.sensors.end(), channels.begin(), channels.end());
        } else if (kind == "actuator") {
            cfg.actuators.insert(cfg.actuators.end(), channels.begin(), channels.end());
        } else if (kind == "both") {
            if (channels.size() != 2) fail(ErrorCode::InvalidArgument, "both:J,L takes exactly two channels");
            cfg.sensors.push_back(channels[0]);
            cfg.actuators.push_back(channels[1]);
        } else {
            fail(ErrorCode::InvalidArgument, "unknown fault kind '" + kind + "'");
        }
    }
    if (cfg.n_f() == 0) fail(ErrorCode::InvalidArgument, "empty fault spec");
    return cfg;
}

std::string fault_to_string(const FaultConfig& cfg) {
    auto list = [](const std::vector<int>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
        return s;
    };
    if (cfg.sensors.size() == 1 && cfg.actuators.size() == 1)
        return "both:" + list(cfg.sensors) + "," + list(cfg.actuators);
    std::string out;
    if (!cfg.sensors.empty()) out += "sensor:" + list(cfg.sensors);
    if (!cfg.actuators.empty()) out += (out.empty() ? "" : ";") + std::string("actuator:") + list(cfg.actuators);
    return out;
}

}  // namespace rhfe::io

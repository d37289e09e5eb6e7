#include "dcp/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcp {

std::string format_double(double v) {
    char buf[40];
    // %.17g round-trips; trim to the shortest representation that still does
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "t,node";
    for (int c = 0; c < traj.m; ++c) os << ",x_" << (c + 1);
    os << "\n";
    for (int t = 0; t <= traj.steps(); ++t)
        for (int i = 0; i < traj.n; ++i) {
            os << t << "," << i;
            for (int c = 0; c < traj.m; ++c) os << "," << format_double(traj.at(t)(i, c));
            os << "\n";
        }
    return os.str();
}

Trajectory trajectory_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("trajectory csv: empty input");
    int m = 0;
    for (char c : line) m += (c == ',');
    m -= 1;  // first two columns are t,node
    if (m < 1) throw std::invalid_argument("trajectory csv: bad header");

    std::vector<std::vector<Eigen::VectorXd>> rows;  // rows[t][node]
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        int t = std::stoi(cell);
        std::getline(ls, cell, ',');
        int node = std::stoi(cell);
        Eigen::VectorXd x(m);
        for (int c = 0; c < m; ++c) {
            if (!std::getline(ls, cell, ',')) throw std::invalid_argument("trajectory csv: short row");
            x[c] = std::strtod(cell.c_str(), nullptr);
        }
        if (t >= static_cast<int>(rows.size())) rows.resize(static_cast<std::size_t>(t) + 1);
        if (node >= static_cast<int>(rows[static_cast<std::size_t>(t)].size()))
            rows[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(node) + 1);
        rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(node)] = x;
    }
    if (rows.empty()) throw std::invalid_argument("trajectory csv: no data rows");
    const int n = static_cast<int>(rows[0].size());
    Trajectory traj;
    traj.n = n;
    traj.m = m;
    traj.protocol = "csv";
    for (const auto& per_node : rows) {
        if (static_cast<int>(per_node.size()) != n)
            throw std::invalid_argument("trajectory csv: inconsistent node count");
        Eigen::MatrixXd state(n, m);
        for (int i = 0; i < n; ++i) state.row(i) = per_node[static_cast<std::size_t>(i)].transpose();
        traj.append(state);
    }
    return traj;
}

std::string canonical_csv(const CanonicalEquation& ceq) {
    std::ostringstream os;
    os << "node";
    for (int c = 0; c < ceq.H.cols(); ++c) os << ",h_" << (c + 1);
    os << ",z\n";
    for (int i = 0; i < ceq.H.rows(); ++i) {
        os << i;
        for (int c = 0; c < ceq.H.cols(); ++c) os << "," << format_double(ceq.H(i, c));
        os << "," << format_double(ceq.z[i]) << "\n";
    }
    return os.str();
}

nlohmann::json trajectory_meta_json(const Trajectory& traj) {
    nlohmann::json j;
    j["protocol"] = traj.protocol;
    j["parameters"] = nlohmann::json::parse(traj.params.empty() ? "{}" : traj.params);
    j["seed"] = traj.seed;
    j["diverged"] = traj.diverged;
    j["n"] = traj.n;
    j["m"] = traj.m;
    j["steps"] = traj.steps();
    return j;
}

std::string svg_line_chart(const std::string& title, const std::vector<double>& x,
                           const std::vector<SvgSeries>& series, bool log_y) {
    const double W = 720, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };

    double xmin = x.front(), xmax = x.back();
    double ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (double v : s.y) {
            ymin = std::min(ymin, ty(v));
            ymax = std::max(ymax, ty(v));
        }
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double v) { return H - mb - (ty(v) - ymin) / (ymax - ymin) * (H - mt - mb); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
       << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = xmin + (xmax - xmin) * k / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
           << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(xv) << "</text>\n";
        double yraw = ymin + (ymax - ymin) * k / 4.0;
        double yv = log_y ? std::pow(10.0, yraw) : yraw;
        os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4
           << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(yv) << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[ci % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < s.y.size(); ++k)
            os << px(x[k]) << "," << py(s.y[k]) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 16 * ci + 12
           << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << colors[ci % 6] << "\">" << s.label
           << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

Graph graph_from_json(const nlohmann::json& j) {
    int n = j.at("n").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    return build_graph(n, edges);
}

WeightMatrix weights_from_json(const nlohmann::json& j, const Graph& g) {
    if (!j.contains("weights")) return metropolis_weights(g);
    const auto& arr = j.at("weights");
    if (static_cast<int>(arr.size()) != g.n * g.n)
        throw std::invalid_argument("weights: expected row-major n*n array");
    Eigen::MatrixXd w(g.n, g.n);
    for (int i = 0; i < g.n; ++i)
        for (int k = 0; k < g.n; ++k) w(i, k) = arr.at(static_cast<std::size_t>(i * g.n + k)).get<double>();
    ValidationReport rep = validate_weight_matrix(w, g);
    if (!rep.valid())
        throw std::invalid_argument("weights: invalid weight matrix: " + rep.violations.front());
    return WeightMatrix{w, 1e-9};
}

LinearEquation equation_from_json(const nlohmann::json& j) {
    const auto& hj = j.at("H");
    int n = static_cast<int>(hj.size());
    int m = static_cast<int>(hj.at(0).size());
    LinearEquation e;
    e.H.resize(n, m);
    e.z.resize(n);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < m; ++c) e.H(i, c) = hj.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
    const auto& zj = j.at("z");
    if (static_cast<int>(zj.size()) != n) throw std::invalid_argument("equation: z size mismatch");
    for (int i = 0; i < n; ++i) e.z[i] = zj.at(static_cast<std::size_t>(i)).get<double>();
    e.validate();
    return e;
}

ConvexSet convex_set_from_json(const nlohmann::json& j) {
    std::string kind = j.at("kind").get<std::string>();
    auto vec = [&](const char* key) {
        const auto& a = j.at(key);
        Eigen::VectorXd v(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) v[static_cast<int>(k)] = a.at(k).get<double>();
        return v;
    };
    if (kind == "ball") return ConvexSet::ball(vec("center"), j.at("radius").get<double>());
    if (kind == "box") return ConvexSet::box(vec("lower"), vec("upper"));
    throw std::invalid_argument("convex set: unknown kind " + kind);
}

PpscMechanism mechanism_from_json(const nlohmann::json& j, const Graph& g) {
    std::string kind = j.at("kind").get<std::string>();
    double sigma = j.value("sigma", 1.0);
    if (kind == "identity") return PpscMechanism::identity();
    if (kind == "ideal") return PpscMechanism::ideal(sigma);
    if (kind == "edge_mask") return PpscMechanism::edge_mask(g, sigma);
    throw std::invalid_argument("mechanism: unknown kind " + kind);
}

QuadraticObjectiveSet objectives_from_json(const nlohmann::json& j) {
    QuadraticObjectiveSet obj;
    for (const auto& node : j) {
        const auto& aj = node.at("A");
        int p = static_cast<int>(aj.size());
        int m = static_cast<int>(aj.at(0).size());
        Eigen::MatrixXd A(p, m);
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < m; ++c) A(r, c) = aj.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
        const auto& bj = node.at("b");
        Eigen::VectorXd b(bj.size());
        for (std::size_t k = 0; k < bj.size(); ++k) b[static_cast<int>(k)] = bj.at(k).get<double>();
        obj.A.push_back(std::move(A));
        obj.b.push_back(std::move(b));
    }
    obj.validate();
    return obj;
}

nlohmann::json message_log_json(const MessageLog& log) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Message& msg : log.messages)
        arr.push_back({{"sender", msg.sender},
                       {"receiver", msg.receiver},
                       {"round", msg.round},
                       {"payload_dim", msg.payload_dim}});
    return arr;
}

}  // namespace dcp

#include "ctl/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ctl {

void validate_dataset(const CausalDataset& ds) {
    const Eigen::Index n = ds.x.rows();
    if (n == 0) throw std::invalid_argument("dataset: empty");
    if (ds.meta.num_treatments < 1) throw std::invalid_argument("dataset: num_treatments must be >= 1");
    if (ds.a.size() != n || ds.y.size() != n || ds.potential.rows() != n) {
        throw std::invalid_argument("dataset: row count mismatch across columns");
    }
    if (ds.potential.cols() != ds.meta.num_treatments + 1) {
        throw std::invalid_argument("dataset: potential table width != num_treatments + 1");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (ds.a[i] < 0 || ds.a[i] > ds.meta.num_treatments) {
            throw std::invalid_argument("dataset: treatment label out of range at row " + std::to_string(i));
        }
    }
    if (ds.meta.n != 0 && ds.meta.n != static_cast<int>(n)) {
        throw std::invalid_argument("dataset: meta.n disagrees with data");
    }
    if (ds.meta.d != 0 && ds.meta.d != static_cast<int>(ds.x.cols())) {
        throw std::invalid_argument("dataset: meta.d disagrees with data");
    }
}

bool factually_consistent(const CausalDataset& ds) {
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        if (ds.y[i] != ds.potential(i, ds.a[i])) return false;
    }
    return true;
}

std::string dataset_id(const DatasetMeta& meta) {
    std::ostringstream out;
    out << meta.family;
    if (meta.family == "heat" && meta.params.contains("k")) {
        out << ":k=" << meta.params["k"].get<double>();
    } else if (meta.family == "movement" && meta.params.contains("m")) {
        out << ":m=" << meta.params["m"].get<double>() << ",k=" << meta.params["k"].get<double>();
    } else if ((meta.family == "ihdp" || meta.family == "surrogate") && meta.params.contains("omega")) {
        out << ":omega=" << meta.params["omega"].get<double>();
    } else if (meta.family == "bundle" && meta.params.contains("parts")) {
        out << ":parts=" << meta.params["parts"].size();
    }
    if (meta.params.contains("flip_p")) {
        out << ":flip=" << meta.params["flip_p"].get<double>();
    }
    if (meta.params.value("counterfactual", false)) {
        out << ":cf";
    }
    out << ":s" << meta.seed;
    return out.str();
}

nlohmann::json meta_to_json(const DatasetMeta& meta) {
    return nlohmann::json{{"family", meta.family},
                          {"params", meta.params},
                          {"seed", meta.seed},
                          {"M", meta.num_treatments},
                          {"n", meta.n},
                          {"d", meta.d},
                          {"outcome_kind", meta.outcome_kind}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
    DatasetMeta meta;
    meta.family = j.at("family").get<std::string>();
    meta.params = j.value("params", nlohmann::json::object());
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.num_treatments = j.at("M").get<int>();
    meta.n = j.value("n", 0);
    meta.d = j.value("d", 0);
    meta.outcome_kind = j.value("outcome_kind", std::string("continuous"));
    return meta;
}

namespace {

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void save_dataset(const CausalDataset& ds, const std::string& path) {
    validate_dataset(ds);
    const Eigen::Index n = ds.n();
    const Eigen::Index d = ds.d();
    const int m = ds.meta.num_treatments;
    std::string text;
    text.reserve(static_cast<std::size_t>(n) * (d + m + 2) * 20);
    for (Eigen::Index j = 0; j < d; ++j) {
        text += "x" + std::to_string(j) + ",";
    }
    text += "a,y";
    for (int t = 0; t <= m; ++t) {
        text += ",y" + std::to_string(t);
    }
    text += "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            append_g17(text, ds.x(i, j));
            text += ",";
        }
        text += std::to_string(ds.a[i]);
        text += ",";
        append_g17(text, ds.y[i]);
        for (int t = 0; t <= m; ++t) {
            text += ",";
            append_g17(text, ds.potential(i, t));
        }
        text += "\n";
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("save_dataset: cannot open " + path);
    file << text;
    if (!file) throw std::runtime_error("save_dataset: write failed for " + path);

    DatasetMeta meta = ds.meta;
    meta.n = static_cast<int>(n);
    meta.d = static_cast<int>(d);
    std::ofstream mf(path + ".meta.json", std::ios::binary);
    if (!mf) throw std::runtime_error("save_dataset: cannot open " + path + ".meta.json");
    mf << meta_to_json(meta).dump(2) << "\n";
}

CausalDataset load_dataset(const std::string& path) {
    std::ifstream mf(path + ".meta.json");
    if (!mf) throw std::runtime_error("load_dataset: missing sidecar " + path + ".meta.json");
    nlohmann::json mj;
    try {
        mf >> mj;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_dataset: bad sidecar json: " + std::string(e.what()));
    }
    DatasetMeta meta = meta_from_json(mj);

    std::ifstream file(path);
    if (!file) throw std::runtime_error("load_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(file, line)) throw std::runtime_error("load_dataset: empty file " + path);

    // header fixes d and the treatment count
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int d = 0;
    while (d < static_cast<int>(header.size()) && header[d] == "x" + std::to_string(d)) ++d;
    const int cols = static_cast<int>(header.size());
    const int m = cols - d - 3;  // after covariates: a, y, then m+1 potentials
    if (d == 0 || m < 1 || header[d] != "a" || header[d + 1] != "y") {
        throw std::runtime_error("load_dataset: malformed header in " + path);
    }
    if (m != meta.num_treatments) {
        throw std::runtime_error("load_dataset: header treatment count disagrees with sidecar");
    }

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(file, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(cols);
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("load_dataset: unparseable cell '" + cell + "' at line " +
                                         std::to_string(lineno));
            }
        }
        if (static_cast<int>(row.size()) != cols) {
            throw std::runtime_error("load_dataset: row width " + std::to_string(row.size()) +
                                     " != " + std::to_string(cols) + " at line " + std::to_string(lineno));
        }
        rows.push_back(std::move(row));
    }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n == 0) throw std::runtime_error("load_dataset: no data rows in " + path);

    CausalDataset ds;
    ds.meta = meta;
    ds.x.resize(n, d);
    ds.a.resize(n);
    ds.y.resize(n);
    ds.potential.resize(n, m + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[i];
        for (int j = 0; j < d; ++j) ds.x(i, j) = row[j];
        const double alabel = row[d];
        const int ai = static_cast<int>(alabel);
        if (alabel != ai || ai < 0 || ai > m) {
            throw std::runtime_error("load_dataset: treatment label out of range at line " +
                                     std::to_string(i + 2));
        }
        ds.a[i] = ai;
        ds.y[i] = row[d + 1];
        for (int t = 0; t <= m; ++t) ds.potential(i, t) = row[d + 2 + t];
    }
    validate_dataset(ds);
    return ds;
}

CausalDataset counterfactual_version(const CausalDataset& ds) {
    validate_dataset(ds);
    if (ds.meta.num_treatments != 1) {
        throw std::invalid_argument("counterfactual_version: defined for binary treatments only");
    }
    CausalDataset out = ds;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        out.a[i] = 1 - ds.a[i];
        out.y[i] = ds.potential(i, out.a[i]);
    }
    out.meta.params["counterfactual"] = true;
    return out;
}

CausalDataset subset(const CausalDataset& ds, const std::vector<int>& rows) {
    CausalDataset out;
    out.meta = ds.meta;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n == 0) throw std::invalid_argument("subset: empty row selection");
    out.x.resize(n, ds.d());
    out.a.resize(n);
    out.y.resize(n);
    out.potential.resize(n, ds.potential.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int r = rows[i];
        if (r < 0 || r >= ds.n()) throw std::out_of_range("subset: row index out of range");
        out.x.row(i) = ds.x.row(r);
        out.a[i] = ds.a[r];
        out.y[i] = ds.y[r];
        out.potential.row(i) = ds.potential.row(r);
    }
    out.meta.n = static_cast<int>(n);
    return out;
}

}  // namespace ctl

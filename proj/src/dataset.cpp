#include "gnnla/dataset.hpp"

#include <cstdio>

#include "gnnla/error.hpp"
#include "gnnla/io.hpp"

namespace gnnla::dataset {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int manifest_version = 1;
const char* const split_names[3] = {"train", "val", "test"};

json meta_to_json(const fem::ProblemInstance& p) {
    const auto& m = p.meta;
    json j = {{"kind", m.kind},         {"seed", m.seed},          {"index", m.index},
              {"n", m.n},               {"h", m.h},                {"grid_nx", p.grid_nx},
              {"grid_ny", p.grid_ny},   {"num_unknowns", p.a.n()}};
    if (m.kind == "jacobi") {
        j["beta"] = m.beta;
        j["band_x"] = m.band_x;
        j["band_col"] = m.band_col;
    } else {
        j["theta_alpha_x"] = m.theta[0];
        j["theta_alpha_y"] = m.theta[1];
        j["theta_beta_x"] = m.theta[2];
        j["theta_beta_y"] = m.theta[3];
    }
    return j;
}

} // namespace

void save_instance(const fem::ProblemInstance& p, const fs::path& dir) {
    p.validate();
    fs::create_directories(dir);
    write_matrix_market(p.a, dir / "matrix.mtx");
    io::write_text(dir / "meta.json", meta_to_json(p).dump(1) + "\n");
    io::CsvWriter coords({"x", "y"});
    for (Index k = 0; k < p.x.size(); ++k) coords.add_row({io::format_double(p.x[k]), io::format_double(p.y[k])});
    coords.save(dir / "coords.csv");
    io::CsvWriter targets({"alpha", "beta"});
    for (Index k = 0; k < p.alpha.size(); ++k)
        targets.add_row({io::format_double(p.alpha[k]), io::format_double(p.beta[k])});
    targets.save(dir / "targets.csv");
}

fem::ProblemInstance load_instance(const fs::path& dir) {
    fem::ProblemInstance p;
    p.a = read_matrix_market(dir / "matrix.mtx");
    json j;
    try {
        j = json::parse(io::read_text(dir / "meta.json"));
        auto& m = p.meta;
        m.kind = j.at("kind").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.index = j.at("index").get<Index>();
        m.n = j.at("n").get<Index>();
        m.h = j.at("h").get<double>();
        p.grid_nx = j.at("grid_nx").get<Index>();
        p.grid_ny = j.at("grid_ny").get<Index>();
        if (m.kind == "jacobi") {
            m.beta = j.at("beta").get<double>();
            m.band_x = j.at("band_x").get<double>();
            m.band_col = j.at("band_col").get<Index>();
        } else if (m.kind == "diffusion") {
            m.theta = {j.at("theta_alpha_x").get<int>(), j.at("theta_alpha_y").get<int>(),
                       j.at("theta_beta_x").get<int>(), j.at("theta_beta_y").get<int>()};
        } else {
            throw Error("unknown instance kind '" + m.kind + "'");
        }
    } catch (const json::exception& e) {
        throw Error((dir / "meta.json").string() + ": " + e.what());
    }
    for (const auto& r : io::read_numeric_csv(dir / "coords.csv")) {
        if (r.size() != 2) throw Error((dir / "coords.csv").string() + ": expected 2 columns");
        p.x.push_back(r[0]);
        p.y.push_back(r[1]);
    }
    for (const auto& r : io::read_numeric_csv(dir / "targets.csv")) {
        if (r.size() != 2) throw Error((dir / "targets.csv").string() + ": expected 2 columns");
        p.alpha.push_back(r[0]);
        p.beta.push_back(r[1]);
    }
    try {
        p.validate();
    } catch (const Error& e) {
        throw Error(dir.string() + ": " + e.what());
    }
    return p;
}

std::string instance_hash(const fs::path& dir) {
    std::string all;
    for (const char* f : {"matrix.mtx", "meta.json", "coords.csv", "targets.csv"}) {
        all += f;
        all += '\n';
        all += io::read_text(dir / f);
    }
    return io::fnv1a_hex(all);
}

void save_dataset(const fem::Dataset& d, const fs::path& root, const json& config, bool force) {
    if (fs::exists(root)) {
        if (!force) throw Error(root.string() + " already exists (use --force to overwrite)");
        fs::remove_all(root);
    }
    const std::vector<fem::ProblemInstance>* parts[3] = {&d.train, &d.val, &d.test};
    json splits = json::object();
    std::string kind;
    for (int s = 0; s < 3; ++s) {
        json entries = json::array();
        for (const auto& p : *parts[s]) {
            char name[16];
            std::snprintf(name, sizeof name, "%05zu", static_cast<std::size_t>(p.meta.index));
            const fs::path rel = fs::path(split_names[s]) / name;
            save_instance(p, root / rel);
            entries.push_back({{"path", rel.generic_string()}, {"hash", instance_hash(root / rel)}});
            kind = p.meta.kind;
        }
        splits[split_names[s]] = entries;
    }
    const json manifest = {
        {"format_version", manifest_version}, {"kind", kind}, {"config", config}, {"splits", splits}};
    io::write_text(root / "manifest.json", manifest.dump(1) + "\n");
}

namespace {

json read_manifest(const fs::path& root) {
    try {
        auto m = json::parse(io::read_text(root / "manifest.json"));
        if (m.at("format_version").get<int>() != manifest_version)
            throw Error((root / "manifest.json").string() + ": unsupported format_version");
        return m;
    } catch (const json::exception& e) {
        throw Error((root / "manifest.json").string() + ": " + e.what());
    }
}

} // namespace

json load_manifest(const fs::path& root) { return read_manifest(root).at("config"); }

fem::Dataset load_dataset(const fs::path& root) {
    const auto m = read_manifest(root);
    fem::Dataset d;
    std::vector<fem::ProblemInstance>* parts[3] = {&d.train, &d.val, &d.test};
    for (int s = 0; s < 3; ++s) {
        if (!m.at("splits").contains(split_names[s])) continue;
        for (const auto& e : m.at("splits").at(split_names[s])) {
            const fs::path dir = root / e.at("path").get<std::string>();
            if (instance_hash(dir) != e.at("hash").get<std::string>())
                throw Error(dir.string() + ": content hash does not match the manifest");
            parts[s]->push_back(load_instance(dir));
        }
    }
    return d;
}

} // namespace gnnla::dataset

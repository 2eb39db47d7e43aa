#include "gnnla/run_config.hpp"

#include <set>

#include "gnnla/error.hpp"
#include "gnnla/io.hpp"

namespace gnnla {

using json = nlohmann::json;

std::string to_string(ProblemKind k) { return k == ProblemKind::jacobi ? "jacobi" : "diffusion"; }

ProblemKind problem_kind_from_string(const std::string& s) {
    if (s == "jacobi") return ProblemKind::jacobi;
    if (s == "diffusion") return ProblemKind::diffusion;
    throw Error("unknown problem kind '" + s + "' (expected jacobi or diffusion)");
}

namespace {

const char* eig_method_name(train::EigenMethod m) {
    switch (m) {
    case train::EigenMethod::dense: return "dense";
    case train::EigenMethod::power: return "power";
    default: return "automatic";
    }
}

train::EigenMethod eig_method_from(const std::string& s, const std::string& where) {
    if (s == "automatic") return train::EigenMethod::automatic;
    if (s == "dense") return train::EigenMethod::dense;
    if (s == "power") return train::EigenMethod::power;
    throw Error(where + ": unknown eigen method '" + s + "'");
}

class Section {
public:
    Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw Error("config: '" + path_ + "' must be an object");
        for (const auto& [k, v] : j.items())
            if (!allowed.count(k)) throw Error("config: unknown key '" + where(k) + "'");
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    std::string where(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    template <class T> void get(const std::string& k, T& out) const {
        if (!j_.contains(k)) return;
        const json& v = j_.at(k);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw Error("config: '" + where(k) + "' must be a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw Error("config: '" + where(k) + "' must be an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                throw Error("config: '" + where(k) + "' must be non-negative");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw Error("config: '" + where(k) + "' must be a number");
            out = v.get<T>();
        } else {
            if (!v.is_string()) throw Error("config: '" + where(k) + "' must be a string");
            out = v.get<std::string>();
        }
    }

    const json& raw(const std::string& k) const { return j_.at(k); }

private:
    const json& j_;
    std::string path_;
};

} // namespace

json RunConfig::dataset_json() const {
    json d = {{"kind", to_string(kind)}, {"seed", seed}};
    if (kind == ProblemKind::jacobi) {
        const auto& c = jacobi_data;
        d.update({{"n_y", c.n_y},
                  {"beta_min", c.beta_min},
                  {"beta_max", c.beta_max},
                  {"n_train", c.n_train},
                  {"n_val", c.n_val},
                  {"n_test", c.n_test}});
    } else {
        const auto& c = diffusion_data;
        d.update({{"n_min", c.n_min},
                  {"n_max", c.n_max},
                  {"theta_max", c.theta_max},
                  {"n_train", c.n_train},
                  {"n_val", c.n_val},
                  {"n_test", c.n_test}});
    }
    return d;
}

json RunConfig::to_json() const {
    json ds = dataset_json();
    ds.erase("seed");
    ds["dir"] = data_dir.string();
    json model = {{"kind", to_string(kind)}};
    if (kind == ProblemKind::diffusion) model["leaky_slope"] = train.leaky_slope;
    const json tr = {{"epochs_max", train.epochs_max},
                     {"batch_size", train.batch_size},
                     {"lr", train.lr},
                     {"K", train.K},
                     {"m", train.m},
                     {"early_stop", train.early_stop},
                     {"patience", train.patience},
                     {"probes", train.probes == train::ProbeKind::unit_sphere ? "unit_sphere" : "dst_high_frequency"}};
    const json ev = {{"k", eval.eig.k},
                     {"tol", eval.eig.tol},
                     {"max_iter", eval.eig.max_iter},
                     {"method", eig_method_name(eval.eig.method)},
                     {"dense_limit", eval.eig.dense_limit},
                     {"bins", eval.bins},
                     {"theta_grid_max", eval.theta_grid_max},
                     {"sweep_n", eval.sweep_n},
                     {"probe_n", eval.probe_n}};
    return {{"version", current_version}, {"seed", seed},   {"output_dir", output_dir.string()},
            {"dataset", ds},              {"model", model}, {"train", tr},
            {"eval", ev}};
}

RunConfig parse_run_config(const json& doc) {
    Section top(doc, "", {"version", "seed", "output_dir", "dataset", "model", "train", "eval"});
    if (!top.has("version")) throw Error("config: missing required key 'version'");
    int version = 0;
    top.get("version", version);
    if (version != RunConfig::current_version)
        throw Error("config: unsupported version " + std::to_string(version) + " (expected " +
                    std::to_string(RunConfig::current_version) + ")");
    RunConfig c;
    top.get("seed", c.seed);
    std::string out = c.output_dir.string();
    top.get("output_dir", out);
    c.output_dir = out;

    std::optional<ProblemKind> kind;
    auto set_kind = [&](const Section& s) {
        if (!s.has("kind")) return;
        std::string k;
        s.get("kind", k);
        const auto pk = problem_kind_from_string(k);
        if (kind && *kind != pk) throw Error("config: dataset.kind and model.kind disagree");
        kind = pk;
    };
    if (top.has("model")) {
        Section m(doc.at("model"), "model", {"kind", "leaky_slope"});
        set_kind(m);
        m.get("leaky_slope", c.train.leaky_slope);
    }
    if (top.has("dataset")) {
        const json& dj = doc.at("dataset");
        std::string k;
        if (dj.is_object() && dj.contains("kind") && dj.at("kind").is_string()) k = dj.at("kind").get<std::string>();
        const bool diffusion = k == "diffusion" || (k.empty() && kind == ProblemKind::diffusion);
        std::set<std::string> allowed = {"kind", "dir", "n_train", "n_val", "n_test"};
        if (diffusion) allowed.insert({"n_min", "n_max", "theta_max"});
        else allowed.insert({"n_y", "beta_min", "beta_max"});
        Section d(dj, "dataset", allowed);
        set_kind(d);
        std::string dir = c.data_dir.string();
        d.get("dir", dir);
        c.data_dir = dir;
        if (diffusion) {
            auto& dc = c.diffusion_data;
            d.get("n_min", dc.n_min);
            d.get("n_max", dc.n_max);
            d.get("theta_max", dc.theta_max);
            d.get("n_train", dc.n_train);
            d.get("n_val", dc.n_val);
            d.get("n_test", dc.n_test);
        } else {
            auto& jc = c.jacobi_data;
            d.get("n_y", jc.n_y);
            d.get("beta_min", jc.beta_min);
            d.get("beta_max", jc.beta_max);
            d.get("n_train", jc.n_train);
            d.get("n_val", jc.n_val);
            d.get("n_test", jc.n_test);
        }
    }
    c.kind = kind.value_or(ProblemKind::jacobi);
    c.jacobi_data.seed = c.seed;
    c.diffusion_data.seed = c.seed;
    c.train.seed = c.seed;
    if (c.kind == ProblemKind::diffusion) c.train.epochs_max = 60;

    if (top.has("train")) {
        Section t(doc.at("train"), "train",
                  {"epochs_max", "batch_size", "lr", "K", "m", "early_stop", "patience", "probes"});
        t.get("epochs_max", c.train.epochs_max);
        t.get("batch_size", c.train.batch_size);
        t.get("lr", c.train.lr);
        t.get("K", c.train.K);
        t.get("m", c.train.m);
        t.get("early_stop", c.train.early_stop);
        t.get("patience", c.train.patience);
        std::string probes = "dst_high_frequency";
        t.get("probes", probes);
        if (probes == "unit_sphere") c.train.probes = train::ProbeKind::unit_sphere;
        else if (probes == "dst_high_frequency") c.train.probes = train::ProbeKind::dst_high_frequency;
        else throw Error("config: train.probes must be dst_high_frequency or unit_sphere");
        c.train.validate();
    }
    if (top.has("eval")) {
        Section e(doc.at("eval"), "eval",
                  {"k", "tol", "max_iter", "method", "dense_limit", "bins", "theta_grid_max", "sweep_n", "probe_n"});
        e.get("k", c.eval.eig.k);
        e.get("tol", c.eval.eig.tol);
        e.get("max_iter", c.eval.eig.max_iter);
        std::string method = "automatic";
        e.get("method", method);
        c.eval.eig.method = eig_method_from(method, "eval.method");
        e.get("dense_limit", c.eval.eig.dense_limit);
        e.get("bins", c.eval.bins);
        e.get("theta_grid_max", c.eval.theta_grid_max);
        e.get("sweep_n", c.eval.sweep_n);
        e.get("probe_n", c.eval.probe_n);
        if (c.eval.bins == 0) throw Error("config: eval.bins must be positive");
        if (c.eval.eig.k == 0) throw Error("config: eval.k must be positive");
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw Error("config " + path.string() + ": invalid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

} // namespace gnnla

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gnnla/autodiff.hpp"
#include "gnnla/graph_net_taped.hpp"
#include "gnnla/rng.hpp"
#include "gnnla/sparse.hpp"

namespace gnnla::nn {

enum class Activation { none, relu, leaky_relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
    Index in = 0;
    Index out = 0;
    bool bias = true;
    Activation activation = Activation::none;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct MLPSpec {
    std::vector<LayerSpec> layers;
    double leaky_slope = 0.01;

    /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last layer `last`.
    static MLPSpec chain(std::initializer_list<Index> widths, Activation hidden, Activation last,
                         double leaky_slope = 0.01);

    /// Throws unless consecutive widths chain and every width is positive.
    void validate() const;
    Index in_width() const { return layers.front().in; }
    Index out_width() const { return layers.back().out; }
    /// sum over layers of in*out (+ out when biased)
    Index param_count() const;

    friend bool operator==(const MLPSpec&, const MLPSpec&) = default;
};

struct NamedMLP {
    std::string name;
    MLPSpec spec;
    friend bool operator==(const NamedMLP&, const NamedMLP&) = default;
};

/// A model is a fixed list of MLPs. Parameters are stored flat: MLP by MLP, and within an
/// MLP layer by layer as W (out x in, row-major) followed by b (out).
struct Architecture {
    std::string kind;
    std::vector<NamedMLP> mlps;

    Index param_count() const;
    const MLPSpec& mlp(const std::string& name) const;
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Jacobi diagonal model: MLP 5 -> 50 -> 20 -> 1 (ReLU hidden, linear out), 1341 parameters.
Architecture jacobi_architecture();
/// Diffusion coefficient model, 14002 parameters: encoders for edges (3 -> 16 -> 16 -> 32),
/// vertices and globals (1 -> 16 -> 16 -> 32), phi_e 128 -> 32 -> 32, phi_v 192 -> 32 -> 2 with
/// a LeakyReLU output.
Architecture diffusion_architecture(double leaky_slope = 0.01);

/// Flat parameter vector with its per-layer shape index.
class ParamStore {
public:
    struct Slot {
        Index mlp;
        Index layer;
        Index rows; // out
        Index cols; // in
        Index w_offset;
        Index b_offset; // == w_offset + rows * cols when biased
        bool bias;
    };

    ParamStore() = default;
    explicit ParamStore(Architecture arch);
    ParamStore(Architecture arch, std::vector<double> values);

    const Architecture& architecture() const { return arch_; }
    std::span<const Slot> slots() const { return slots_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    Index size() const { return values_.size(); }
    /// Slots belonging to one MLP, in layer order.
    std::span<const Slot> slots_of(Index mlp) const;

private:
    Architecture arch_;
    std::vector<Slot> slots_;
    std::vector<Index> mlp_begin_;
    std::vector<double> values_;
};

/// Glorot-uniform weights U(-sqrt(6/(in+out)), +), zero biases, drawn in storage order.
std::vector<double> init_glorot(const Architecture& arch, Rng& rng);

/// Plain evaluation of one MLP on a batch of rows (rows x in_width).
ad::Tensor mlp_forward(const MLPSpec& spec, std::span<const double> params, const ad::Tensor& input);

/// Parameters placed on a tape as one (W, b) leaf pair per layer.
class BoundParams {
public:
    BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable = true);
    ad::Var weight(std::size_t slot) const { return w_[slot]; }
    ad::Var bias(std::size_t slot) const { return b_[slot]; }
    const ParamStore& store() const { return *store_; }
    /// Flattens the gradients of all leaves into the parameter layout.
    std::vector<double> flatten(const ad::Grad& grad) const;

private:
    const ParamStore* store_;
    std::vector<ad::Var> w_, b_;
    bool trainable_;
};

/// Taped evaluation of the MLP with the given index in the architecture.
ad::Var mlp_forward(const BoundParams& params, Index mlp, ad::Var input);

/// Gradient check of a scalar loss with respect to all model parameters, using central
/// differences. Per coordinate,
///   rel = |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-4 * max_k |g_ad,k|, 1e-12);
/// the floor sits above the rounding noise of a difference quotient through a deep network.
/// Coordinates that disagree at `step` are retried at 0.3, 0.1 and 10 times the step (kinks of
/// the activations, rounding) and report their best agreement. max_coords > 0 samples that many
/// parameters.
double param_grad_check(const ParamStore& store, const std::function<ad::Var(const BoundParams&)>& loss,
                        double step = 1e-6, std::size_t max_coords = 0, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Jacobi model

/// Per-vertex features [A_ii, min, mean, sum, max] of the off-diagonal entries in row i
/// (incoming edges of vertex i), computed with a message-passing aggregation.
ad::Tensor jacobi_features(const SparseMatrixCSR& a);

/// d (n x 1) on the tape from precomputed features.
ad::Var jacobi_model_forward(const BoundParams& params, ad::Var features);

/// Plain evaluation: the learned D^{-1} diagonal.
DenseVector jacobi_model_forward(const SparseMatrixCSR& a, const ParamStore& params);

// ---------------------------------------------------------------------------
// Diffusion model

/// Graph inputs: edges (A_ij, x_rel, y_rel) with offsets in units of h, minimum image on the
/// periodic unit square; vertices A_ii; global h. Self-edges are not included.
struct DiffusionInputs {
    graph_net::Topology topology;
    ad::Tensor edges;    // (num_edges, 3)
    ad::Tensor vertices; // (n, 1)
    ad::Tensor global;   // (1, 1)
};

DiffusionInputs diffusion_inputs(const SparseMatrixCSR& a, std::span<const double> x, std::span<const double> y,
                                 double h);

/// (n x 2) predictions (alpha, beta) on the tape.
ad::Var diffusion_model_forward(const BoundParams& params, const DiffusionInputs& in);

/// Plain evaluation, (n x 2).
ad::Tensor diffusion_model_forward(const DiffusionInputs& in, const ParamStore& params);

// ---------------------------------------------------------------------------
// Optimiser

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update. State vectors are sized on first use.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg = {});

// ---------------------------------------------------------------------------
// Checkpoints

struct TrainingRecord {
    std::uint64_t seed = 0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    double best_val_loss = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    bool operator==(const TrainingRecord&) const = default;
};

struct Checkpoint {
    static constexpr int format_version = 1;
    ParamStore params;
    TrainingRecord training;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace gnnla::nn

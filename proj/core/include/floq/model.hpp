#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "floq/error.hpp"
#include "floq/fuzzy.hpp"
#include "floq/kg.hpp"
#include "floq/metagraph.hpp"
#include "floq/rng.hpp"

namespace floq {

// Shapes of the two message-passing networks. Both share the layer count and
// hidden width; the readout is a fixed two-layer perceptron ending in one
// scalar unit.
struct HyperParams {
    std::uint32_t layer_count = 6;
    std::uint32_t hidden_dim = 64;

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

inline void check_hyper(const HyperParams& h) {
    require(h.layer_count >= 1 && h.hidden_dim >= 1,
            "model error: layer_count and hidden_dim must be >= 1");
}

enum class TensorKind : std::uint8_t { Embedding, Weight, Bias };

struct TensorSpec {
    std::string name;
    TensorKind kind;
    std::uint32_t rows;
    std::uint32_t cols;
    std::size_t offset;  // element offset into the flat value buffer

    std::size_t count() const { return std::size_t(rows) * cols; }
};

// Deterministic flat layout of every learnable tensor. The relation-level
// network owns a labeling seed vector, per-layer meta-relation embeddings and
// update affinities; the entity-level network owns per-layer context-to-edge
// projections and update affinities; the readout closes with the scalar MLP.
std::vector<TensorSpec> parameter_layout(const HyperParams& hyper);
std::size_t parameter_count(const HyperParams& hyper);

namespace layout {

inline std::size_t rel_block(std::uint32_t h) { return std::size_t(4) * h + 2 * std::size_t(h) * h + h; }
inline std::size_t ent_block(std::uint32_t h) { return 3 * std::size_t(h) * h + 2 * std::size_t(h); }

inline std::size_t seed_off(const HyperParams&) { return 0; }
inline std::size_t rel_edge_off(const HyperParams& p, std::uint32_t l) {
    return p.hidden_dim + l * rel_block(p.hidden_dim);
}
inline std::size_t rel_w_off(const HyperParams& p, std::uint32_t l) {
    return rel_edge_off(p, l) + std::size_t(4) * p.hidden_dim;
}
inline std::size_t rel_b_off(const HyperParams& p, std::uint32_t l) {
    return rel_w_off(p, l) + 2 * std::size_t(p.hidden_dim) * p.hidden_dim;
}
inline std::size_t ent_base(const HyperParams& p) {
    return p.hidden_dim + p.layer_count * rel_block(p.hidden_dim);
}
inline std::size_t ctx_w_off(const HyperParams& p, std::uint32_t l) {
    return ent_base(p) + l * ent_block(p.hidden_dim);
}
inline std::size_t ctx_b_off(const HyperParams& p, std::uint32_t l) {
    return ctx_w_off(p, l) + std::size_t(p.hidden_dim) * p.hidden_dim;
}
inline std::size_t ent_w_off(const HyperParams& p, std::uint32_t l) {
    return ctx_b_off(p, l) + p.hidden_dim;
}
inline std::size_t ent_b_off(const HyperParams& p, std::uint32_t l) {
    return ent_w_off(p, l) + 2 * std::size_t(p.hidden_dim) * p.hidden_dim;
}
inline std::size_t readout_base(const HyperParams& p) {
    return ent_base(p) + p.layer_count * ent_block(p.hidden_dim);
}
inline std::size_t ro_w1_off(const HyperParams& p) { return readout_base(p); }
inline std::size_t ro_b1_off(const HyperParams& p) {
    return ro_w1_off(p) + std::size_t(p.hidden_dim) * p.hidden_dim;
}
inline std::size_t ro_w2_off(const HyperParams& p) { return ro_b1_off(p) + p.hidden_dim; }
inline std::size_t ro_b2_off(const HyperParams& p) { return ro_w2_off(p) + p.hidden_dim; }
inline std::size_t total(const HyperParams& p) { return ro_b2_off(p) + 1; }

}  // namespace layout

// All learnable weights in one flat buffer, addressed through span accessors.
// Nothing here depends on any entity or relation vocabulary; total size is a
// function of HyperParams alone.
template <class S>
struct ModelParameters {
    HyperParams hyper;
    std::vector<S> values;

    std::span<S> span_at(std::size_t off, std::size_t n) { return {values.data() + off, n}; }
    std::span<const S> span_at(std::size_t off, std::size_t n) const {
        return {values.data() + off, n};
    }

    std::span<const S> query_seed() const { return span_at(layout::seed_off(hyper), hyper.hidden_dim); }
    std::span<const S> rel_edge_embed(std::uint32_t l) const {
        return span_at(layout::rel_edge_off(hyper, l), std::size_t(4) * hyper.hidden_dim);
    }
    std::span<const S> rel_update_w(std::uint32_t l) const {
        return span_at(layout::rel_w_off(hyper, l), 2 * std::size_t(hyper.hidden_dim) * hyper.hidden_dim);
    }
    std::span<const S> rel_update_b(std::uint32_t l) const {
        return span_at(layout::rel_b_off(hyper, l), hyper.hidden_dim);
    }
    std::span<const S> ctx_proj_w(std::uint32_t l) const {
        return span_at(layout::ctx_w_off(hyper, l), std::size_t(hyper.hidden_dim) * hyper.hidden_dim);
    }
    std::span<const S> ctx_proj_b(std::uint32_t l) const {
        return span_at(layout::ctx_b_off(hyper, l), hyper.hidden_dim);
    }
    std::span<const S> ent_update_w(std::uint32_t l) const {
        return span_at(layout::ent_w_off(hyper, l), 2 * std::size_t(hyper.hidden_dim) * hyper.hidden_dim);
    }
    std::span<const S> ent_update_b(std::uint32_t l) const {
        return span_at(layout::ent_b_off(hyper, l), hyper.hidden_dim);
    }
    std::span<const S> readout_w1() const {
        return span_at(layout::ro_w1_off(hyper), std::size_t(hyper.hidden_dim) * hyper.hidden_dim);
    }
    std::span<const S> readout_b1() const { return span_at(layout::ro_b1_off(hyper), hyper.hidden_dim); }
    std::span<const S> readout_w2() const { return span_at(layout::ro_w2_off(hyper), hyper.hidden_dim); }
    std::span<const S> readout_b2() const { return span_at(layout::ro_b2_off(hyper), 1); }

    template <class T>
    ModelParameters<T> cast() const {
        ModelParameters<T> out;
        out.hyper = hyper;
        out.values.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            out.values[i] = static_cast<T>(values[i]);
        }
        return out;
    }
};

// Deterministic initialization: weight matrices uniform in
// +-sqrt(6 / fan_in), embedding vectors uniform in +-1, biases zero. Values
// are drawn in double and cast, so float and double packs built from one seed
// correspond.
template <class S>
ModelParameters<S> init_parameters(std::uint64_t seed, const HyperParams& hyper) {
    check_hyper(hyper);
    ModelParameters<S> params;
    params.hyper = hyper;
    params.values.assign(parameter_count(hyper), S(0));
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));
    for (const TensorSpec& spec : parameter_layout(hyper)) {
        switch (spec.kind) {
            case TensorKind::Bias:
                break;
            case TensorKind::Embedding: {
                for (std::size_t i = 0; i < spec.count(); ++i) {
                    params.values[spec.offset + i] = static_cast<S>(rng.uniform(-1.0, 1.0));
                }
                break;
            }
            case TensorKind::Weight: {
                const double bound = std::sqrt(6.0 / spec.cols);
                for (std::size_t i = 0; i < spec.count(); ++i) {
                    params.values[spec.offset + i] = static_cast<S>(rng.uniform(-bound, bound));
                }
                break;
            }
        }
    }
    return params;
}

// Conditional representation of every relation given the query relation:
// row r is relation r's state after message passing over the meta-graph with
// the labeling seed placed on the query relation node.
template <class S>
struct RelationContext {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
    std::vector<S> data;

    std::span<const S> row(std::uint32_t r) const { return {data.data() + std::size_t(r) * dim, dim}; }
};

namespace detail {

inline double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline constexpr double kScoreFloor = 1e-12;

// One message-passing network pass, shared by the relation level and the
// entity level. Node states evolve as
//   agg_v   = sum over incoming edges (u, f, v) of state_u * feature_f
//   state'_v = relu(W [state_v ; agg_v] + b) + state_v
// with edges visited in ascending index order so sums are reproducible.
template <class S, class EdgeIter>
void mp_layer_forward(std::uint32_t n_nodes, std::uint32_t h, EdgeIter edges_begin,
                      EdgeIter edges_end, const S* feats, const std::vector<S>& state,
                      std::span<const S> w, std::span<const S> b, std::vector<S>& agg,
                      std::vector<S>& preact, std::vector<S>& next) {
    agg.assign(std::size_t(n_nodes) * h, S(0));
    for (EdgeIter it = edges_begin; it != edges_end; ++it) {
        const auto [u, f, v] = *it;
        const S* su = state.data() + std::size_t(u) * h;
        const S* ff = feats + std::size_t(f) * h;
        S* av = agg.data() + std::size_t(v) * h;
        for (std::uint32_t i = 0; i < h; ++i) {
            av[i] += su[i] * ff[i];
        }
    }
    preact.resize(std::size_t(n_nodes) * h);
    next.resize(std::size_t(n_nodes) * h);
    for (std::uint32_t v = 0; v < n_nodes; ++v) {
        const S* sv = state.data() + std::size_t(v) * h;
        const S* av = agg.data() + std::size_t(v) * h;
        S* zv = preact.data() + std::size_t(v) * h;
        S* nv = next.data() + std::size_t(v) * h;
        for (std::uint32_t i = 0; i < h; ++i) {
            const S* row = w.data() + std::size_t(i) * 2 * h;
            S acc = b[i];
            for (std::uint32_t j = 0; j < h; ++j) {
                acc += row[j] * sv[j];
            }
            for (std::uint32_t j = 0; j < h; ++j) {
                acc += row[h + j] * av[j];
            }
            zv[i] = acc;
            nv[i] = (acc > S(0) ? acc : S(0)) + sv[i];
        }
    }
}

}  // namespace detail

// Layer-by-layer activations of one projection call; enough to compute exact
// gradients with respect to every parameter and to the input weights.
// Holds non-owning pointers to the graph, meta-graph and parameters it was
// recorded against; those must outlive the tape.
template <class S>
struct ForwardTape {
    const ModelParameters<S>* params = nullptr;
    const KnowledgeGraph* kg = nullptr;
    const RelationMetaGraph* mg = nullptr;
    RelationId query_relation = 0;
    std::vector<S> input;  // validated input weights, cast to S

    // relation-level network (R nodes)
    std::vector<std::vector<S>> rel_states;   // layer_count + 1
    std::vector<std::vector<S>> rel_preacts;  // layer_count
    std::vector<std::vector<S>> rel_aggs;     // layer_count

    // entity-level network (V nodes)
    std::vector<std::vector<S>> ctx_feats;    // layer_count, R*H edge features
    std::vector<std::vector<S>> ent_states;   // layer_count + 1
    std::vector<std::vector<S>> ent_preacts;  // layer_count
    std::vector<std::vector<S>> ent_aggs;     // layer_count

    std::vector<S> readout_pre;     // V*H
    std::vector<S> readout_hidden;  // V*H
    std::vector<double> logits;     // V
    std::vector<std::uint8_t> clamped;
    FuzzySet scores;
};

template <class S>
RelationContext<S> relation_context(const ModelParameters<S>& params,
                                    const RelationMetaGraph& mg, RelationId query_relation);

template <class S>
FuzzySet project(const ModelParameters<S>& params, const KnowledgeGraph& kg,
                 const RelationMetaGraph& mg, const FuzzySet& input_weights,
                 RelationId query_relation);

template <class S>
std::pair<FuzzySet, std::unique_ptr<ForwardTape<S>>> project_with_tape(
    const ModelParameters<S>& params, const KnowledgeGraph& kg, const RelationMetaGraph& mg,
    const FuzzySet& input_weights, RelationId query_relation);

// Re-runs the recorded forward; bit-identical to the taped scores.
template <class S>
FuzzySet replay(const ForwardTape<S>& tape);

// Exact reverse-mode gradients of <upstream, scores> with respect to every
// parameter (accumulated into param_grad, laid out like the parameter buffer)
// and to the input weights (returned, for chaining through multi-hop
// queries).
template <class S>
std::vector<double> backward(const ForwardTape<S>& tape, const std::vector<double>& upstream,
                             std::vector<S>& param_grad);

// ---------------------------------------------------------------------------
// implementation

namespace detail {

struct MetaEdgeView {
    const MetaEdge* e;
    std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> operator*() const {
        return {e->src, static_cast<std::uint32_t>(e->kind), e->dst};
    }
    MetaEdgeView& operator++() { ++e; return *this; }
    bool operator!=(const MetaEdgeView& o) const { return e != o.e; }
};

struct TripleView {
    const Triple* e;
    std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> operator*() const {
        return {e->head, e->relation, e->tail};
    }
    TripleView& operator++() { ++e; return *this; }
    bool operator!=(const TripleView& o) const { return e != o.e; }
};

template <class S>
void relation_forward(const ModelParameters<S>& params, const RelationMetaGraph& mg,
                      RelationId q, std::vector<std::vector<S>>& states,
                      std::vector<std::vector<S>>& preacts, std::vector<std::vector<S>>& aggs) {
    const std::uint32_t h = params.hyper.hidden_dim;
    const std::uint32_t layers = params.hyper.layer_count;
    const std::uint32_t n = mg.node_count();
    require(q < n, "model error: query relation id out of range");

    states.assign(1, std::vector<S>(std::size_t(n) * h, S(0)));
    preacts.clear();
    aggs.clear();
    const auto seed = params.query_seed();
    for (std::uint32_t i = 0; i < h; ++i) {
        states[0][std::size_t(q) * h + i] = seed[i];
    }
    for (std::uint32_t l = 0; l < layers; ++l) {
        aggs.emplace_back();
        preacts.emplace_back();
        states.emplace_back();
        mp_layer_forward(n, h, MetaEdgeView{mg.edges().data()},
                         MetaEdgeView{mg.edges().data() + mg.edges().size()},
                         params.rel_edge_embed(l).data(), states[l], params.rel_update_w(l),
                         params.rel_update_b(l), aggs[l], preacts[l], states[l + 1]);
    }
}

}  // namespace detail

template <class S>
RelationContext<S> relation_context(const ModelParameters<S>& params,
                                    const RelationMetaGraph& mg, RelationId query_relation) {
    std::vector<std::vector<S>> states, preacts, aggs;
    detail::relation_forward(params, mg, query_relation, states, preacts, aggs);
    RelationContext<S> ctx;
    ctx.rows = mg.node_count();
    ctx.dim = params.hyper.hidden_dim;
    ctx.data = std::move(states.back());
    return ctx;
}

template <class S>
std::pair<FuzzySet, std::unique_ptr<ForwardTape<S>>> project_with_tape(
    const ModelParameters<S>& params, const KnowledgeGraph& kg, const RelationMetaGraph& mg,
    const FuzzySet& input_weights, RelationId query_relation) {
    const std::uint32_t h = params.hyper.hidden_dim;
    const std::uint32_t layers = params.hyper.layer_count;
    const std::uint32_t n_ent = kg.entity_count();
    const std::uint32_t n_rel = kg.relation_count();
    require(mg.node_count() == n_rel,
            "model error: meta-graph node count does not match graph relations");
    require(query_relation < n_rel, "model error: query relation id out of range");
    check_fuzzy(input_weights, n_ent, "model error: projection input");

    auto tape = std::make_unique<ForwardTape<S>>();
    tape->params = &params;
    tape->kg = &kg;
    tape->mg = &mg;
    tape->query_relation = query_relation;
    tape->input.resize(n_ent);
    for (std::uint32_t v = 0; v < n_ent; ++v) {
        tape->input[v] = static_cast<S>(input_weights[v]);
    }

    detail::relation_forward(params, mg, query_relation, tape->rel_states, tape->rel_preacts,
                             tape->rel_aggs);
    const std::vector<S>& rctx = tape->rel_states.back();

    // initial entity states: input weight times the query relation's row
    const S* rq = rctx.data() + std::size_t(query_relation) * h;
    tape->ent_states.assign(1, std::vector<S>(std::size_t(n_ent) * h));
    for (std::uint32_t v = 0; v < n_ent; ++v) {
        S* sv = tape->ent_states[0].data() + std::size_t(v) * h;
        const S xv = tape->input[v];
        for (std::uint32_t i = 0; i < h; ++i) {
            sv[i] = xv * rq[i];
        }
    }

    for (std::uint32_t l = 0; l < layers; ++l) {
        // per-layer edge features: linear image of the relation context
        tape->ctx_feats.emplace_back(std::size_t(n_rel) * h);
        std::vector<S>& feats = tape->ctx_feats.back();
        const auto pw = params.ctx_proj_w(l);
        const auto pb = params.ctx_proj_b(l);
        for (std::uint32_t r = 0; r < n_rel; ++r) {
            const S* cr = rctx.data() + std::size_t(r) * h;
            S* fr = feats.data() + std::size_t(r) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                const S* row = pw.data() + std::size_t(i) * h;
                S acc = pb[i];
                for (std::uint32_t j = 0; j < h; ++j) {
                    acc += row[j] * cr[j];
                }
                fr[i] = acc;
            }
        }
        tape->ent_aggs.emplace_back();
        tape->ent_preacts.emplace_back();
        tape->ent_states.emplace_back();
        detail::mp_layer_forward(n_ent, h, detail::TripleView{kg.edges().data()},
                                 detail::TripleView{kg.edges().data() + kg.edges().size()},
                                 feats.data(), tape->ent_states[l], params.ent_update_w(l),
                                 params.ent_update_b(l), tape->ent_aggs[l], tape->ent_preacts[l],
                                 tape->ent_states[l + 1]);
    }

    // readout: sigmoid(w2 . relu(w1 h + b1) + b2), clamped away from {0,1}
    const std::vector<S>& hfinal = tape->ent_states.back();
    const auto w1 = params.readout_w1();
    const auto b1 = params.readout_b1();
    const auto w2 = params.readout_w2();
    const S b2 = params.readout_b2()[0];
    tape->readout_pre.resize(std::size_t(n_ent) * h);
    tape->readout_hidden.resize(std::size_t(n_ent) * h);
    tape->logits.resize(n_ent);
    tape->clamped.assign(n_ent, 0);
    tape->scores.resize(n_ent);
    for (std::uint32_t v = 0; v < n_ent; ++v) {
        const S* hv = hfinal.data() + std::size_t(v) * h;
        S* pre = tape->readout_pre.data() + std::size_t(v) * h;
        S* hid = tape->readout_hidden.data() + std::size_t(v) * h;
        S logit = b2;
        for (std::uint32_t i = 0; i < h; ++i) {
            const S* row = w1.data() + std::size_t(i) * h;
            S acc = b1[i];
            for (std::uint32_t j = 0; j < h; ++j) {
                acc += row[j] * hv[j];
            }
            pre[i] = acc;
            hid[i] = acc > S(0) ? acc : S(0);
            logit += w2[i] * hid[i];
        }
        tape->logits[v] = static_cast<double>(logit);
        double s = detail::stable_sigmoid(tape->logits[v]);
        if (s < detail::kScoreFloor) {
            s = detail::kScoreFloor;
            tape->clamped[v] = 1;
        } else if (s > 1.0 - detail::kScoreFloor) {
            s = 1.0 - detail::kScoreFloor;
            tape->clamped[v] = 1;
        }
        tape->scores[v] = s;
    }
    FuzzySet scores = tape->scores;
    return {std::move(scores), std::move(tape)};
}

template <class S>
FuzzySet project(const ModelParameters<S>& params, const KnowledgeGraph& kg,
                 const RelationMetaGraph& mg, const FuzzySet& input_weights,
                 RelationId query_relation) {
    return project_with_tape(params, kg, mg, input_weights, query_relation).first;
}

template <class S>
FuzzySet replay(const ForwardTape<S>& tape) {
    FuzzySet input(tape.input.size());
    for (std::size_t v = 0; v < tape.input.size(); ++v) {
        input[v] = static_cast<double>(tape.input[v]);
    }
    return project(*tape.params, *tape.kg, *tape.mg, input, tape.query_relation);
}

template <class S>
std::vector<double> backward(const ForwardTape<S>& tape, const std::vector<double>& upstream,
                             std::vector<S>& param_grad) {
    const ModelParameters<S>& params = *tape.params;
    const std::uint32_t h = params.hyper.hidden_dim;
    const std::uint32_t layers = params.hyper.layer_count;
    const std::uint32_t n_ent = tape.kg->entity_count();
    const std::uint32_t n_rel = tape.mg->node_count();
    require(upstream.size() == n_ent, "model error: upstream gradient length mismatch");
    require(param_grad.size() == params.values.size(),
            "model error: gradient buffer size mismatch");

    auto grad_at = [&](std::size_t off) { return param_grad.data() + off; };

    // readout backward
    std::vector<S> dh(std::size_t(n_ent) * h, S(0));
    {
        const auto w1 = params.readout_w1();
        const auto w2 = params.readout_w2();
        S* g_w1 = grad_at(layout::ro_w1_off(params.hyper));
        S* g_b1 = grad_at(layout::ro_b1_off(params.hyper));
        S* g_w2 = grad_at(layout::ro_w2_off(params.hyper));
        S* g_b2 = grad_at(layout::ro_b2_off(params.hyper));
        const std::vector<S>& hfinal = tape.ent_states.back();
        for (std::uint32_t v = 0; v < n_ent; ++v) {
            double dlogit_d = 0.0;
            if (!tape.clamped[v]) {
                const double s = tape.scores[v];
                dlogit_d = upstream[v] * s * (1.0 - s);
            }
            if (dlogit_d == 0.0) {
                continue;
            }
            const S dlogit = static_cast<S>(dlogit_d);
            const S* hid = tape.readout_hidden.data() + std::size_t(v) * h;
            const S* pre = tape.readout_pre.data() + std::size_t(v) * h;
            const S* hv = hfinal.data() + std::size_t(v) * h;
            S* dhv = dh.data() + std::size_t(v) * h;
            *g_b2 += dlogit;
            for (std::uint32_t i = 0; i < h; ++i) {
                g_w2[i] += dlogit * hid[i];
                S dt = dlogit * w2[i];
                if (pre[i] <= S(0)) {
                    dt = S(0);
                }
                if (dt == S(0)) {
                    continue;
                }
                g_b1[i] += dt;
                const S* row = w1.data() + std::size_t(i) * h;
                S* g_row = g_w1 + std::size_t(i) * h;
                for (std::uint32_t j = 0; j < h; ++j) {
                    g_row[j] += dt * hv[j];
                    dhv[j] += dt * row[j];
                }
            }
        }
    }

    // entity layers, reversed
    std::vector<S> drctx(std::size_t(n_rel) * h, S(0));
    std::vector<S> dagg(std::size_t(n_ent) * h);
    std::vector<S> dfeat(std::size_t(n_rel) * h);
    std::vector<S> dh_prev(std::size_t(n_ent) * h);
    const std::vector<S>& rctx = tape.rel_states.back();
    for (std::uint32_t l = layers; l-- > 0;) {
        const auto w = params.ent_update_w(l);
        S* g_w = grad_at(layout::ent_w_off(params.hyper, l));
        S* g_b = grad_at(layout::ent_b_off(params.hyper, l));
        const std::vector<S>& state = tape.ent_states[l];
        const std::vector<S>& agg = tape.ent_aggs[l];
        const std::vector<S>& pre = tape.ent_preacts[l];
        dagg.assign(std::size_t(n_ent) * h, S(0));
        // residual pass-through plus the update affinity
        dh_prev = dh;
        for (std::uint32_t v = 0; v < n_ent; ++v) {
            const S* dhv = dh.data() + std::size_t(v) * h;
            const S* sv = state.data() + std::size_t(v) * h;
            const S* av = agg.data() + std::size_t(v) * h;
            const S* zv = pre.data() + std::size_t(v) * h;
            S* dsv = dh_prev.data() + std::size_t(v) * h;
            S* dav = dagg.data() + std::size_t(v) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                if (zv[i] <= S(0)) {
                    continue;
                }
                const S dz = dhv[i];
                if (dz == S(0)) {
                    continue;
                }
                g_b[i] += dz;
                const S* row = w.data() + std::size_t(i) * 2 * h;
                S* g_row = g_w + std::size_t(i) * 2 * h;
                for (std::uint32_t j = 0; j < h; ++j) {
                    g_row[j] += dz * sv[j];
                    g_row[h + j] += dz * av[j];
                    dsv[j] += dz * row[j];
                    dav[j] += dz * row[h + j];
                }
            }
        }
        // messages: state_u * feat_r accumulated at the tail
        const std::vector<S>& feats = tape.ctx_feats[l];
        dfeat.assign(std::size_t(n_rel) * h, S(0));
        for (const Triple& t : tape.kg->edges()) {
            const S* dav = dagg.data() + std::size_t(t.tail) * h;
            const S* su = state.data() + std::size_t(t.head) * h;
            const S* fr = feats.data() + std::size_t(t.relation) * h;
            S* dsu = dh_prev.data() + std::size_t(t.head) * h;
            S* dfr = dfeat.data() + std::size_t(t.relation) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                dsu[i] += dav[i] * fr[i];
                dfr[i] += dav[i] * su[i];
            }
        }
        // edge features came from the per-layer context projection
        const auto pw = params.ctx_proj_w(l);
        S* g_pw = grad_at(layout::ctx_w_off(params.hyper, l));
        S* g_pb = grad_at(layout::ctx_b_off(params.hyper, l));
        for (std::uint32_t r = 0; r < n_rel; ++r) {
            const S* dfr = dfeat.data() + std::size_t(r) * h;
            const S* cr = rctx.data() + std::size_t(r) * h;
            S* dcr = drctx.data() + std::size_t(r) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                const S d = dfr[i];
                if (d == S(0)) {
                    continue;
                }
                g_pb[i] += d;
                const S* row = pw.data() + std::size_t(i) * h;
                S* g_row = g_pw + std::size_t(i) * h;
                for (std::uint32_t j = 0; j < h; ++j) {
                    g_row[j] += d * cr[j];
                    dcr[j] += d * row[j];
                }
            }
        }
        dh.swap(dh_prev);
    }

    // initial entity states: h0_v = x_v * rctx[q]
    std::vector<double> input_grad(n_ent, 0.0);
    {
        const S* rq = rctx.data() + std::size_t(tape.query_relation) * h;
        S* dq = drctx.data() + std::size_t(tape.query_relation) * h;
        for (std::uint32_t v = 0; v < n_ent; ++v) {
            const S* dhv = dh.data() + std::size_t(v) * h;
            const S xv = tape.input[v];
            double acc = 0.0;
            for (std::uint32_t i = 0; i < h; ++i) {
                acc += static_cast<double>(dhv[i]) * static_cast<double>(rq[i]);
                dq[i] += xv * dhv[i];
            }
            input_grad[v] = acc;
        }
    }

    // relation layers, reversed, with drctx as the head gradient
    std::vector<S> ds = std::move(drctx);
    std::vector<S> ds_prev(std::size_t(n_rel) * h);
    std::vector<S> dragg(std::size_t(n_rel) * h);
    for (std::uint32_t l = layers; l-- > 0;) {
        const auto w = params.rel_update_w(l);
        S* g_w = grad_at(layout::rel_w_off(params.hyper, l));
        S* g_b = grad_at(layout::rel_b_off(params.hyper, l));
        const std::vector<S>& state = tape.rel_states[l];
        const std::vector<S>& agg = tape.rel_aggs[l];
        const std::vector<S>& pre = tape.rel_preacts[l];
        dragg.assign(std::size_t(n_rel) * h, S(0));
        ds_prev = ds;
        for (std::uint32_t v = 0; v < n_rel; ++v) {
            const S* dsv_in = ds.data() + std::size_t(v) * h;
            const S* sv = state.data() + std::size_t(v) * h;
            const S* av = agg.data() + std::size_t(v) * h;
            const S* zv = pre.data() + std::size_t(v) * h;
            S* dsv = ds_prev.data() + std::size_t(v) * h;
            S* dav = dragg.data() + std::size_t(v) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                if (zv[i] <= S(0)) {
                    continue;
                }
                const S dz = dsv_in[i];
                if (dz == S(0)) {
                    continue;
                }
                g_b[i] += dz;
                const S* row = w.data() + std::size_t(i) * 2 * h;
                S* g_row = g_w + std::size_t(i) * 2 * h;
                for (std::uint32_t j = 0; j < h; ++j) {
                    g_row[j] += dz * sv[j];
                    g_row[h + j] += dz * av[j];
                    dsv[j] += dz * row[j];
                    dav[j] += dz * row[h + j];
                }
            }
        }
        const auto embed = params.rel_edge_embed(l);
        S* g_embed = grad_at(layout::rel_edge_off(params.hyper, l));
        for (const MetaEdge& e : tape.mg->edges()) {
            const S* dav = dragg.data() + std::size_t(e.dst) * h;
            const S* su = state.data() + std::size_t(e.src) * h;
            const S* fk = embed.data() + std::size_t(e.kind) * h;
            S* dsu = ds_prev.data() + std::size_t(e.src) * h;
            S* dfk = g_embed + std::size_t(static_cast<std::uint8_t>(e.kind)) * h;
            for (std::uint32_t i = 0; i < h; ++i) {
                dsu[i] += dav[i] * fk[i];
                dfk[i] += dav[i] * su[i];
            }
        }
        ds.swap(ds_prev);
    }

    // labeling seed sits on the query relation node
    {
        S* g_seed = grad_at(layout::seed_off(params.hyper));
        const S* dq = ds.data() + std::size_t(tape.query_relation) * h;
        for (std::uint32_t i = 0; i < h; ++i) {
            g_seed[i] += dq[i];
        }
    }
    return input_grad;
}

}  // namespace floq

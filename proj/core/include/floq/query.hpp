#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "floq/fuzzy.hpp"
#include "floq/kg.hpp"
#include "floq/metagraph.hpp"
#include "floq/model.hpp"

namespace floq {

// First-order query tree: anchors at the leaves, relation projections along
// edges, intersection/union/negation as connectives. Negation is only legal
// as a direct child of an intersection.
struct QueryNode {
    enum class Kind : std::uint8_t { Anchor, Projection, Intersection, Union, Negation };

    Kind kind = Kind::Anchor;
    EntityId entity = 0;        // Anchor
    RelationId relation = 0;    // Projection
    std::vector<QueryNode> children;

    static QueryNode anchor(EntityId e);
    static QueryNode projection(RelationId r, QueryNode child);
    static QueryNode intersection(std::vector<QueryNode> children);
    static QueryNode set_union(std::vector<QueryNode> children);
    static QueryNode negation(QueryNode child);

    friend bool operator==(const QueryNode&, const QueryNode&) = default;
};

// Structural validation: arities, negation placement, id ranges.
void validate_query(const QueryNode& q, std::uint32_t entity_count,
                    std::uint32_t relation_count);

// The 14 standard tree shapes.
enum class QueryType : std::uint8_t {
    OneP, TwoP, ThreeP, TwoI, ThreeI, PI, IP, TwoU, UP,
    TwoIN, ThreeIN, INP, PIN, PNI,
};

inline constexpr std::array<QueryType, 14> kAllQueryTypes = {
    QueryType::OneP, QueryType::TwoP, QueryType::ThreeP, QueryType::TwoI, QueryType::ThreeI,
    QueryType::PI,   QueryType::IP,   QueryType::TwoU,   QueryType::UP,   QueryType::TwoIN,
    QueryType::ThreeIN, QueryType::INP, QueryType::PIN, QueryType::PNI,
};

// Nine types built from projection/intersection/union only.
inline constexpr std::array<QueryType, 9> kEpfoTypes = {
    QueryType::OneP, QueryType::TwoP, QueryType::ThreeP, QueryType::TwoI, QueryType::ThreeI,
    QueryType::PI,   QueryType::IP,   QueryType::TwoU,   QueryType::UP,
};

// Five types containing a negated branch.
inline constexpr std::array<QueryType, 5> kNegationTypes = {
    QueryType::TwoIN, QueryType::ThreeIN, QueryType::INP, QueryType::PIN, QueryType::PNI,
};

// The ten types used for training; pi, ip, 2u, up are held out for zero-shot
// compositional evaluation.
inline constexpr std::array<QueryType, 10> kTrainQueryTypes = {
    QueryType::OneP, QueryType::TwoP, QueryType::ThreeP, QueryType::TwoI, QueryType::ThreeI,
    QueryType::TwoIN, QueryType::ThreeIN, QueryType::INP, QueryType::PIN, QueryType::PNI,
};

const char* query_type_name(QueryType t);
std::optional<QueryType> query_type_from_name(const std::string& name);

// Structural match against the 14 canonical shapes (order of intersection /
// union operands does not matter); anything else is reported as unsupported
// but remains executable.
std::optional<QueryType> pattern_of(const QueryNode& q);

// JSON document form: {"op":"anchor","ent":0} | {"op":"proj","rel":0,
// "child":...} | {"op":"and"/"or","children":[...]} | {"op":"not",
// "child":...}. Ids are validated against the given vocabulary sizes.
QueryNode parse_query(const std::string& json_text, std::uint32_t entity_count,
                      std::uint32_t relation_count);
std::string query_to_json(const QueryNode& q);

// Exact set semantics over the given graph; negation complements against the
// full entity set (it is only ever consumed inside an intersection).
EntitySet traverse(const QueryNode& q, const KnowledgeGraph& kg);

enum class ExecMode : std::uint8_t { Trained, LpThreshold };

struct ExecutionConfig {
    ExecMode mode = ExecMode::Trained;
    double lp_threshold = 0.8;  // in (0,1) when mode == LpThreshold
};

inline void check_exec_config(const ExecutionConfig& cfg) {
    if (cfg.mode == ExecMode::LpThreshold) {
        require(cfg.lp_threshold > 0.0 && cfg.lp_threshold < 1.0,
                "config error: lp threshold must lie strictly inside (0,1)");
    }
}

// Relation projection abstraction: maps input weights to per-entity scores.
using Projector = std::function<FuzzySet(const FuzzySet&, RelationId)>;

// Exact one-hop oracle: indicator of project_symbolic over the input support.
Projector symbolic_projector(const KnowledgeGraph& kg);

// Recursive fuzzy evaluation. Anchors become one-hot sets; intersections fold
// the t-norm left to right, unions the t-conorm; in LpThreshold mode each
// projection input coming from a non-anchor child has entries below the
// threshold zeroed first (anchors are already single-source).
FuzzySet execute(const QueryNode& q, std::uint32_t entity_count, const Projector& proj,
                 const ExecutionConfig& cfg);

template <class S>
FuzzySet execute(const QueryNode& q, const KnowledgeGraph& kg, const RelationMetaGraph& mg,
                 const ModelParameters<S>& params, const ExecutionConfig& cfg) {
    check_exec_config(cfg);
    Projector proj = [&](const FuzzySet& input, RelationId r) {
        return project(params, kg, mg, input, r);
    };
    return execute(q, kg.entity_count(), proj, cfg);
}

// ---------------------------------------------------------------------------
// Traced execution: keeps per-projection tapes and fold intermediates so the
// loss gradient can be pushed back through the whole query tree.

template <class S>
struct ExecutionTrace {
    QueryNode::Kind kind = QueryNode::Kind::Anchor;
    FuzzySet output;
    std::vector<ExecutionTrace<S>> children;

    // Projection only: the input actually fed to the operator (post
    // thresholding) plus which entries survived it.
    std::vector<std::uint8_t> kept;
    std::unique_ptr<ForwardTape<S>> tape;

    // Intersection/Union only: fold[i] is the running combination of
    // children[0..i]; fold.back() equals output.
    std::vector<FuzzySet> fold;
};

template <class S>
ExecutionTrace<S> execute_traced(const QueryNode& q, const KnowledgeGraph& kg,
                                 const RelationMetaGraph& mg, const ModelParameters<S>& params,
                                 const ExecutionConfig& cfg) {
    check_exec_config(cfg);
    ExecutionTrace<S> trace;
    trace.kind = q.kind;
    switch (q.kind) {
        case QueryNode::Kind::Anchor: {
            require(q.entity < kg.entity_count(), "query error: anchor entity out of range");
            trace.output = one_hot(kg.entity_count(), q.entity);
            break;
        }
        case QueryNode::Kind::Projection: {
            trace.children.push_back(execute_traced(q.children[0], kg, mg, params, cfg));
            FuzzySet input = trace.children[0].output;
            trace.kept.assign(input.size(), 1);
            if (cfg.mode == ExecMode::LpThreshold &&
                q.children[0].kind != QueryNode::Kind::Anchor) {
                for (std::size_t i = 0; i < input.size(); ++i) {
                    if (input[i] < cfg.lp_threshold) {
                        input[i] = 0.0;
                        trace.kept[i] = 0;
                    }
                }
            }
            auto [scores, tape] = project_with_tape(params, kg, mg, input, q.relation);
            trace.output = std::move(scores);
            trace.tape = std::move(tape);
            break;
        }
        case QueryNode::Kind::Intersection:
        case QueryNode::Kind::Union: {
            const bool is_and = q.kind == QueryNode::Kind::Intersection;
            for (const QueryNode& c : q.children) {
                trace.children.push_back(execute_traced(c, kg, mg, params, cfg));
            }
            trace.fold.push_back(trace.children[0].output);
            for (std::size_t i = 1; i < trace.children.size(); ++i) {
                trace.fold.push_back(is_and
                                         ? t_norm(trace.fold.back(), trace.children[i].output)
                                         : t_conorm(trace.fold.back(), trace.children[i].output));
            }
            trace.output = trace.fold.back();
            break;
        }
        case QueryNode::Kind::Negation: {
            trace.children.push_back(execute_traced(q.children[0], kg, mg, params, cfg));
            trace.output = negate(trace.children[0].output);
            break;
        }
    }
    return trace;
}

// Pushes d<loss>/d<output> down the trace, accumulating parameter gradients.
// Fuzzy operators differentiate as d(xy)/dx = y, d(x+y-xy)/dx = 1-y,
// d(1-x)/dx = -1; thresholded-away projection inputs pass no gradient.
template <class S>
void trace_backward(const ExecutionTrace<S>& trace, const std::vector<double>& upstream,
                    std::vector<S>& param_grad) {
    switch (trace.kind) {
        case QueryNode::Kind::Anchor:
            return;
        case QueryNode::Kind::Projection: {
            std::vector<double> dinput = backward(*trace.tape, upstream, param_grad);
            for (std::size_t i = 0; i < dinput.size(); ++i) {
                if (!trace.kept[i]) {
                    dinput[i] = 0.0;
                }
            }
            trace_backward(trace.children[0], dinput, param_grad);
            return;
        }
        case QueryNode::Kind::Intersection:
        case QueryNode::Kind::Union: {
            const bool is_and = trace.kind == QueryNode::Kind::Intersection;
            const std::size_t m = trace.children.size();
            std::vector<double> dfold = upstream;  // gradient wrt fold[i]
            for (std::size_t i = m; i-- > 1;) {
                const FuzzySet& prev = trace.fold[i - 1];
                const FuzzySet& child = trace.children[i].output;
                std::vector<double> dchild(child.size());
                std::vector<double> dprev(child.size());
                for (std::size_t v = 0; v < child.size(); ++v) {
                    if (is_and) {
                        dchild[v] = dfold[v] * prev[v];
                        dprev[v] = dfold[v] * child[v];
                    } else {
                        dchild[v] = dfold[v] * (1.0 - prev[v]);
                        dprev[v] = dfold[v] * (1.0 - child[v]);
                    }
                }
                trace_backward(trace.children[i], dchild, param_grad);
                dfold = std::move(dprev);
            }
            trace_backward(trace.children[0], dfold, param_grad);
            return;
        }
        case QueryNode::Kind::Negation: {
            std::vector<double> dchild(upstream.size());
            for (std::size_t v = 0; v < upstream.size(); ++v) {
                dchild[v] = -upstream[v];
            }
            trace_backward(trace.children[0], dchild, param_grad);
            return;
        }
    }
}

}  // namespace floq

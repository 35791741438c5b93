#pragma once

#include <cstdint>
#include <vector>

#include "floq/kg.hpp"

namespace floq {

// Structural interactions between two relations, determined by which edge
// endpoints they share. Integer encoding is stable (serialized in dumps).
enum class MetaKind : std::uint8_t {
    HeadToTail = 0,
    TailToHead = 1,
    HeadToHead = 2,
    TailToTail = 3,
};

inline constexpr int kMetaKindCount = 4;

const char* meta_kind_name(MetaKind kind);

struct MetaEdge {
    RelationId src;
    MetaKind kind;
    RelationId dst;

    friend bool operator==(const MetaEdge&, const MetaEdge&) = default;
    friend auto operator<=>(const MetaEdge&, const MetaEdge&) = default;
};

// Graph over relation ids. Nodes are the relations of the source graph
// (inverses included); edges depend only on graph structure, never on entity
// identity, which is what makes representations computed over it transfer to
// graphs with unseen vocabularies.
class RelationMetaGraph {
public:
    RelationMetaGraph() = default;
    RelationMetaGraph(std::uint32_t node_count, std::vector<MetaEdge> edges);

    std::uint32_t node_count() const { return node_count_; }
    // Sorted by (src, kind, dst), unique; index order is the message order.
    const std::vector<MetaEdge>& edges() const { return edges_; }

    bool has_edge(RelationId src, MetaKind kind, RelationId dst) const;

private:
    std::uint32_t node_count_ = 0;
    std::vector<MetaEdge> edges_;
};

// For every ordered pair of distinct relations (ri, rj):
//   (ri, TailToHead, rj)  iff tails(ri) intersects heads(rj)
//   (ri, HeadToTail, rj)  iff heads(ri) intersects tails(rj)
//   (ri, HeadToHead, rj)  iff heads(ri) intersects heads(rj)
//   (ri, TailToTail, rj)  iff tails(ri) intersects tails(rj)
// Self-pairs are excluded: they hold for any relation with at least one edge
// and carry no signal. Requires an inverse-augmented graph. Expected cost is
// linear in the number of (entity, incident-relation) pairs rather than
// quadratic in relations times entities.
RelationMetaGraph build_metagraph(const KnowledgeGraph& kg);

}  // namespace floq

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floq/error.hpp"

namespace floq {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Sorted-unique id vectors are the entity-set currency of the whole library.
using EntitySet = std::vector<EntityId>;

bool set_contains(const EntitySet& s, EntityId v);
EntitySet set_union(const EntitySet& a, const EntitySet& b);
EntitySet set_intersect(const EntitySet& a, const EntitySet& b);
EntitySet set_difference(const EntitySet& a, const EntitySet& b);

// Directed multigraph with typed edges. Immutable after construction; edges
// are kept sorted by (relation, head, tail) and indexed in both directions
// per relation, so forward and backward one-hop expansions are O(log) lookups
// plus a contiguous scan.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Validates ids, dedups, sorts, builds both adjacency indices.
    static KnowledgeGraph from_triples(std::vector<Triple> edges,
                                       std::uint32_t entity_count,
                                       std::uint32_t base_relation_count,
                                       bool augmented,
                                       std::vector<std::string> entity_labels = {},
                                       std::vector<std::string> relation_labels = {});

    std::uint32_t entity_count() const { return entity_count_; }
    std::uint32_t base_relation_count() const { return base_relation_count_; }
    std::uint32_t relation_count() const {
        return augmented_ ? 2 * base_relation_count_ : base_relation_count_;
    }
    bool augmented() const { return augmented_; }

    const std::vector<Triple>& edges() const { return edges_; }

    // Tails reachable from `head` via `relation`, sorted ascending.
    std::span<const EntityId> tails(RelationId relation, EntityId head) const;
    // Heads reaching `tail` via `relation`, sorted ascending.
    std::span<const EntityId> heads(RelationId relation, EntityId tail) const;

    bool has_edge(const Triple& t) const;

    // Requires an augmented graph; involution inv(inv(r)) == r.
    RelationId inverse(RelationId r) const;

    const std::vector<std::string>& entity_labels() const { return entity_labels_; }
    const std::vector<std::string>& relation_labels() const { return relation_labels_; }
    std::string entity_name(EntityId v) const;
    std::string relation_name(RelationId r) const;

private:
    std::uint32_t entity_count_ = 0;
    std::uint32_t base_relation_count_ = 0;
    bool augmented_ = false;
    std::vector<Triple> edges_;  // sorted by (relation, head, tail)

    // CSR per relation and direction.
    struct Csr {
        std::vector<std::uint32_t> offsets;  // entity_count + 1 entries
        std::vector<EntityId> items;
    };
    std::vector<Csr> forward_;   // [relation]: head -> tails
    std::vector<Csr> backward_;  // [relation]: tail -> heads

    std::vector<std::string> entity_labels_;
    std::vector<std::string> relation_labels_;
};

// Parses tab-separated triples, building vocabularies in first-appearance
// order (head, relation, tail per line). Duplicate triples are dropped.
// Lines without exactly three fields raise a parse error with line number.
// The result is not inverse-augmented.
KnowledgeGraph load_triples(std::string_view text);
KnowledgeGraph load_triples_file(const std::string& path);

// Adds relation r + base_relation_count with reversed endpoints for every
// base edge. Errors if the graph is already augmented.
KnowledgeGraph augment_inverses(const KnowledgeGraph& kg);

// { t | exists h in sources with (h, relation, t) in edges }, sorted.
EntitySet project_symbolic(const KnowledgeGraph& kg, const EntitySet& sources,
                           RelationId relation);

// Union of edge sets; inverses of `extra` are added when the graph is
// augmented. Ids must be valid in the graph's vocabularies.
KnowledgeGraph merge(const KnowledgeGraph& graph, std::span<const Triple> extra);

struct GraphSplit {
    KnowledgeGraph train;  // inverse-augmented observed graph
    std::vector<Triple> valid_missing;
    std::vector<Triple> test_missing;
};

// Parses train/valid/test triple text with a shared vocabulary built in
// first-appearance order across the three inputs (train first). The train
// graph is inverse-augmented; the missing sets stay as base triples.
GraphSplit load_split(std::string_view train_text, std::string_view valid_text,
                      std::string_view test_text);

// Binary graph bundle: magic line, JSON manifest line, raw uint32 LE triples
// (graph edges, then valid_missing, then test_missing).
void save_graph_bundle(const std::string& path, const GraphSplit& split);
GraphSplit load_graph_bundle(const std::string& path);
bool is_graph_bundle(const std::string& path);

// Accepts either a bundle or a TSV file (sniffed by magic); TSV graphs are
// augmented on load and have empty missing sets.
GraphSplit load_graph_any(const std::string& path);

}  // namespace floq

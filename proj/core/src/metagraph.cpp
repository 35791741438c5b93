#include "floq/metagraph.hpp"

#include <algorithm>
#include <unordered_set>

namespace floq {

const char* meta_kind_name(MetaKind kind) {
    switch (kind) {
        case MetaKind::HeadToTail: return "HEAD_TO_TAIL";
        case MetaKind::TailToHead: return "TAIL_TO_HEAD";
        case MetaKind::HeadToHead: return "HEAD_TO_HEAD";
        case MetaKind::TailToTail: return "TAIL_TO_TAIL";
    }
    return "?";
}

RelationMetaGraph::RelationMetaGraph(std::uint32_t node_count, std::vector<MetaEdge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
    for (const MetaEdge& e : edges_) {
        require(e.src < node_count_ && e.dst < node_count_,
                "metagraph error: relation id out of range");
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool RelationMetaGraph::has_edge(RelationId src, MetaKind kind, RelationId dst) const {
    return std::binary_search(edges_.begin(), edges_.end(), MetaEdge{src, kind, dst});
}

RelationMetaGraph build_metagraph(const KnowledgeGraph& kg) {
    require(kg.augmented(), "metagraph error: graph must be inverse-augmented");
    const std::uint32_t n = kg.relation_count();

    // Relations incident to each entity, deduplicated per entity.
    std::vector<std::vector<RelationId>> head_rels(kg.entity_count());
    std::vector<std::vector<RelationId>> tail_rels(kg.entity_count());
    for (const Triple& t : kg.edges()) {
        head_rels[t.head].push_back(t.relation);
        tail_rels[t.tail].push_back(t.relation);
    }
    auto dedup = [](std::vector<RelationId>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };

    std::unordered_set<std::uint64_t> seen;
    std::vector<MetaEdge> edges;
    auto emit = [&](RelationId src, MetaKind kind, RelationId dst) {
        if (src == dst) {
            return;
        }
        const std::uint64_t key = (std::uint64_t(src) << 34) |
                                  (std::uint64_t(kind) << 32) | std::uint64_t(dst);
        if (seen.insert(key).second) {
            edges.push_back({src, kind, dst});
        }
    };

    for (EntityId v = 0; v < kg.entity_count(); ++v) {
        auto& hs = head_rels[v];
        auto& ts = tail_rels[v];
        dedup(hs);
        dedup(ts);
        for (RelationId ri : ts) {
            for (RelationId rj : hs) {
                emit(ri, MetaKind::TailToHead, rj);  // shared entity: tail(ri) == head(rj)
            }
        }
        for (RelationId ri : hs) {
            for (RelationId rj : ts) {
                emit(ri, MetaKind::HeadToTail, rj);
            }
        }
        for (RelationId ri : hs) {
            for (RelationId rj : hs) {
                emit(ri, MetaKind::HeadToHead, rj);
            }
        }
        for (RelationId ri : ts) {
            for (RelationId rj : ts) {
                emit(ri, MetaKind::TailToTail, rj);
            }
        }
    }
    return RelationMetaGraph(n, std::move(edges));
}

}  // namespace floq

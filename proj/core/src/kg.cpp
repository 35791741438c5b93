#include "floq/kg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace floq {

bool set_contains(const EntitySet& s, EntityId v) {
    return std::binary_search(s.begin(), s.end(), v);
}

EntitySet set_union(const EntitySet& a, const EntitySet& b) {
    EntitySet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

EntitySet set_intersect(const EntitySet& a, const EntitySet& b) {
    EntitySet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

EntitySet set_difference(const EntitySet& a, const EntitySet& b) {
    EntitySet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

KnowledgeGraph KnowledgeGraph::from_triples(std::vector<Triple> edges,
                                            std::uint32_t entity_count,
                                            std::uint32_t base_relation_count,
                                            bool augmented,
                                            std::vector<std::string> entity_labels,
                                            std::vector<std::string> relation_labels) {
    KnowledgeGraph kg;
    kg.entity_count_ = entity_count;
    kg.base_relation_count_ = base_relation_count;
    kg.augmented_ = augmented;

    const std::uint32_t relation_count = kg.relation_count();
    for (const Triple& t : edges) {
        require(t.head < entity_count && t.tail < entity_count,
                "graph error: entity id out of range");
        require(t.relation < relation_count, "graph error: relation id out of range");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    kg.edges_ = std::move(edges);

    if (!entity_labels.empty()) {
        require(entity_labels.size() == entity_count,
                "graph error: entity label count mismatch");
    }
    if (!relation_labels.empty()) {
        require(relation_labels.size() == relation_count,
                "graph error: relation label count mismatch");
    }
    kg.entity_labels_ = std::move(entity_labels);
    kg.relation_labels_ = std::move(relation_labels);

    // Build CSR indices in both directions.
    kg.forward_.resize(relation_count);
    kg.backward_.resize(relation_count);
    std::vector<std::uint32_t> fdeg(std::size_t(relation_count) * entity_count, 0);
    std::vector<std::uint32_t> bdeg(std::size_t(relation_count) * entity_count, 0);
    for (const Triple& t : kg.edges_) {
        ++fdeg[std::size_t(t.relation) * entity_count + t.head];
        ++bdeg[std::size_t(t.relation) * entity_count + t.tail];
    }
    for (std::uint32_t r = 0; r < relation_count; ++r) {
        Csr& f = kg.forward_[r];
        Csr& b = kg.backward_[r];
        f.offsets.assign(entity_count + 1, 0);
        b.offsets.assign(entity_count + 1, 0);
        for (std::uint32_t v = 0; v < entity_count; ++v) {
            f.offsets[v + 1] = f.offsets[v] + fdeg[std::size_t(r) * entity_count + v];
            b.offsets[v + 1] = b.offsets[v] + bdeg[std::size_t(r) * entity_count + v];
        }
        f.items.resize(f.offsets[entity_count]);
        b.items.resize(b.offsets[entity_count]);
    }
    std::vector<std::uint32_t> fcur(std::size_t(relation_count) * entity_count, 0);
    std::vector<std::uint32_t> bcur(std::size_t(relation_count) * entity_count, 0);
    for (const Triple& t : kg.edges_) {
        Csr& f = kg.forward_[t.relation];
        Csr& b = kg.backward_[t.relation];
        f.items[f.offsets[t.head] + fcur[std::size_t(t.relation) * entity_count + t.head]++] =
            t.tail;
        b.items[b.offsets[t.tail] + bcur[std::size_t(t.relation) * entity_count + t.tail]++] =
            t.head;
    }
    // Edges are sorted by (relation, head, tail), so forward lists come out
    // sorted; backward lists need a per-bucket sort.
    for (std::uint32_t r = 0; r < relation_count; ++r) {
        Csr& b = kg.backward_[r];
        for (std::uint32_t v = 0; v < entity_count; ++v) {
            std::sort(b.items.begin() + b.offsets[v], b.items.begin() + b.offsets[v + 1]);
        }
    }
    return kg;
}

std::span<const EntityId> KnowledgeGraph::tails(RelationId relation, EntityId head) const {
    require(relation < relation_count(), "graph error: relation id out of range");
    require(head < entity_count_, "graph error: entity id out of range");
    const Csr& c = forward_[relation];
    return {c.items.data() + c.offsets[head], c.offsets[head + 1] - c.offsets[head]};
}

std::span<const EntityId> KnowledgeGraph::heads(RelationId relation, EntityId tail) const {
    require(relation < relation_count(), "graph error: relation id out of range");
    require(tail < entity_count_, "graph error: entity id out of range");
    const Csr& c = backward_[relation];
    return {c.items.data() + c.offsets[tail], c.offsets[tail + 1] - c.offsets[tail]};
}

bool KnowledgeGraph::has_edge(const Triple& t) const {
    if (t.relation >= relation_count() || t.head >= entity_count_ || t.tail >= entity_count_) {
        return false;
    }
    const auto ts = tails(t.relation, t.head);
    return std::binary_search(ts.begin(), ts.end(), t.tail);
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
    require(augmented_, "graph error: inverse() requires an augmented graph");
    require(r < relation_count(), "graph error: relation id out of range");
    return r < base_relation_count_ ? r + base_relation_count_ : r - base_relation_count_;
}

std::string KnowledgeGraph::entity_name(EntityId v) const {
    if (v < entity_labels_.size()) {
        return entity_labels_[v];
    }
    return "e" + std::to_string(v);
}

std::string KnowledgeGraph::relation_name(RelationId r) const {
    if (r < relation_labels_.size()) {
        return relation_labels_[r];
    }
    return "r" + std::to_string(r);
}

namespace {

struct Vocab {
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::string> labels;

    std::uint32_t intern(std::string_view name) {
        auto it = ids.find(std::string(name));
        if (it != ids.end()) {
            return it->second;
        }
        const auto id = static_cast<std::uint32_t>(labels.size());
        labels.emplace_back(name);
        ids.emplace(labels.back(), id);
        return id;
    }
};

// One pass over TSV text; appends triples using the shared vocabularies.
void scan_triples(std::string_view text, Vocab& entities, Vocab& relations,
                  std::vector<Triple>& out) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        const std::size_t t1 = line.find('\t');
        const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        const bool bad = t1 == std::string_view::npos || t2 == std::string_view::npos ||
                         line.find('\t', t2 + 1) != std::string_view::npos;
        if (bad) {
            fail("parse error at line " + std::to_string(line_no) +
                 ": expected 3 tab-separated fields");
        }
        const std::string_view h = line.substr(0, t1);
        const std::string_view r = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string_view t = line.substr(t2 + 1);
        const EntityId hid = entities.intern(h);
        const RelationId rid = relations.intern(r);
        const EntityId tid = entities.intern(t);
        out.push_back({hid, rid, tid});
        if (pos > text.size()) break;
    }
}

}  // namespace

KnowledgeGraph load_triples(std::string_view text) {
    Vocab entities, relations;
    std::vector<Triple> triples;
    scan_triples(text, entities, relations, triples);
    return KnowledgeGraph::from_triples(std::move(triples),
                                        static_cast<std::uint32_t>(entities.labels.size()),
                                        static_cast<std::uint32_t>(relations.labels.size()),
                                        /*augmented=*/false, std::move(entities.labels),
                                        std::move(relations.labels));
}

KnowledgeGraph load_triples_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io error: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_triples(ss.str());
}

KnowledgeGraph augment_inverses(const KnowledgeGraph& kg) {
    require(!kg.augmented(), "graph error: graph is already inverse-augmented");
    const std::uint32_t base = kg.base_relation_count();
    std::vector<Triple> edges = kg.edges();
    edges.reserve(edges.size() * 2);
    for (const Triple& t : kg.edges()) {
        edges.push_back({t.tail, t.relation + base, t.head});
    }
    std::vector<std::string> rel_labels = kg.relation_labels();
    if (!rel_labels.empty()) {
        rel_labels.reserve(2 * base);
        for (std::uint32_t r = 0; r < base; ++r) {
            rel_labels.push_back(rel_labels[r] + "^-1");
        }
    }
    return KnowledgeGraph::from_triples(std::move(edges), kg.entity_count(), base,
                                        /*augmented=*/true, kg.entity_labels(),
                                        std::move(rel_labels));
}

EntitySet project_symbolic(const KnowledgeGraph& kg, const EntitySet& sources,
                           RelationId relation) {
    require(relation < kg.relation_count(), "graph error: relation id out of range");
    EntitySet out;
    for (EntityId h : sources) {
        const auto ts = kg.tails(relation, h);
        out.insert(out.end(), ts.begin(), ts.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

KnowledgeGraph merge(const KnowledgeGraph& graph, std::span<const Triple> extra) {
    std::vector<Triple> edges = graph.edges();
    edges.reserve(edges.size() + extra.size() * 2);
    for (const Triple& t : extra) {
        require(t.head < graph.entity_count() && t.tail < graph.entity_count(),
                "graph error: merge triple has unknown entity id");
        require(t.relation < graph.relation_count(),
                "graph error: merge triple has unknown relation id");
        edges.push_back(t);
        if (graph.augmented()) {
            edges.push_back({t.tail, graph.inverse(t.relation), t.head});
        }
    }
    return KnowledgeGraph::from_triples(std::move(edges), graph.entity_count(),
                                        graph.base_relation_count(), graph.augmented(),
                                        graph.entity_labels(), graph.relation_labels());
}

GraphSplit load_split(std::string_view train_text, std::string_view valid_text,
                      std::string_view test_text) {
    Vocab entities, relations;
    std::vector<Triple> train, valid, test;
    scan_triples(train_text, entities, relations, train);
    scan_triples(valid_text, entities, relations, valid);
    scan_triples(test_text, entities, relations, test);
    KnowledgeGraph base = KnowledgeGraph::from_triples(
        std::move(train), static_cast<std::uint32_t>(entities.labels.size()),
        static_cast<std::uint32_t>(relations.labels.size()),
        /*augmented=*/false, std::move(entities.labels), std::move(relations.labels));
    GraphSplit split;
    split.train = augment_inverses(base);
    split.valid_missing = std::move(valid);
    split.test_missing = std::move(test);
    return split;
}

namespace {

constexpr std::string_view kBundleMagic = "FLOQGRAPH1";

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.good(), "io error: truncated graph bundle");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void write_triples(std::ostream& out, std::span<const Triple> ts) {
    for (const Triple& t : ts) {
        write_u32(out, t.head);
        write_u32(out, t.relation);
        write_u32(out, t.tail);
    }
}

std::vector<Triple> read_triples(std::istream& in, std::size_t n) {
    std::vector<Triple> ts(n);
    for (Triple& t : ts) {
        t.head = read_u32(in);
        t.relation = read_u32(in);
        t.tail = read_u32(in);
    }
    return ts;
}

}  // namespace

void save_graph_bundle(const std::string& path, const GraphSplit& split) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io error: cannot write " + path);
    nlohmann::json manifest;
    manifest["entities"] = split.train.entity_count();
    manifest["base_relations"] = split.train.base_relation_count();
    manifest["augmented"] = split.train.augmented();
    manifest["edges"] = split.train.edges().size();
    manifest["valid_missing"] = split.valid_missing.size();
    manifest["test_missing"] = split.test_missing.size();
    manifest["entity_labels"] = split.train.entity_labels();
    manifest["relation_labels"] = split.train.relation_labels();
    out << kBundleMagic << "\n" << manifest.dump() << "\n";
    write_triples(out, split.train.edges());
    write_triples(out, split.valid_missing);
    write_triples(out, split.test_missing);
    require(out.good(), "io error: failed writing " + path);
}

bool is_graph_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) {
        return false;
    }
    std::string magic(kBundleMagic.size(), '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    return in.good() && magic == kBundleMagic;
}

GraphSplit load_graph_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io error: cannot open " + path);
    std::string line;
    std::getline(in, line);
    require(line == kBundleMagic, "io error: " + path + " is not a graph bundle");
    std::getline(in, line);
    nlohmann::json manifest = nlohmann::json::parse(line, nullptr, false);
    require(!manifest.is_discarded(), "io error: bad bundle manifest in " + path);

    const auto entity_count = manifest.at("entities").get<std::uint32_t>();
    const auto base = manifest.at("base_relations").get<std::uint32_t>();
    const bool augmented = manifest.at("augmented").get<bool>();
    const auto n_edges = manifest.at("edges").get<std::size_t>();
    const auto n_valid = manifest.at("valid_missing").get<std::size_t>();
    const auto n_test = manifest.at("test_missing").get<std::size_t>();
    auto entity_labels = manifest.at("entity_labels").get<std::vector<std::string>>();
    auto relation_labels = manifest.at("relation_labels").get<std::vector<std::string>>();

    GraphSplit split;
    split.train = KnowledgeGraph::from_triples(read_triples(in, n_edges), entity_count, base,
                                               augmented, std::move(entity_labels),
                                               std::move(relation_labels));
    split.valid_missing = read_triples(in, n_valid);
    split.test_missing = read_triples(in, n_test);
    return split;
}

GraphSplit load_graph_any(const std::string& path) {
    if (is_graph_bundle(path)) {
        return load_graph_bundle(path);
    }
    GraphSplit split;
    split.train = augment_inverses(load_triples_file(path));
    return split;
}

}  // namespace floq

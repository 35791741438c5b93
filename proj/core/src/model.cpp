#include "floq/model.hpp"

namespace floq {

std::vector<TensorSpec> parameter_layout(const HyperParams& hyper) {
    check_hyper(hyper);
    const std::uint32_t h = hyper.hidden_dim;
    std::vector<TensorSpec> specs;
    specs.push_back({"relation.query_seed", TensorKind::Embedding, 1, h, layout::seed_off(hyper)});
    for (std::uint32_t l = 0; l < hyper.layer_count; ++l) {
        const std::string p = "relation.layer" + std::to_string(l) + ".";
        specs.push_back({p + "edge_embed", TensorKind::Embedding, 4, h, layout::rel_edge_off(hyper, l)});
        specs.push_back({p + "update_w", TensorKind::Weight, h, 2 * h, layout::rel_w_off(hyper, l)});
        specs.push_back({p + "update_b", TensorKind::Bias, 1, h, layout::rel_b_off(hyper, l)});
    }
    for (std::uint32_t l = 0; l < hyper.layer_count; ++l) {
        const std::string p = "entity.layer" + std::to_string(l) + ".";
        specs.push_back({p + "ctx_proj_w", TensorKind::Weight, h, h, layout::ctx_w_off(hyper, l)});
        specs.push_back({p + "ctx_proj_b", TensorKind::Bias, 1, h, layout::ctx_b_off(hyper, l)});
        specs.push_back({p + "update_w", TensorKind::Weight, h, 2 * h, layout::ent_w_off(hyper, l)});
        specs.push_back({p + "update_b", TensorKind::Bias, 1, h, layout::ent_b_off(hyper, l)});
    }
    specs.push_back({"readout.w1", TensorKind::Weight, h, h, layout::ro_w1_off(hyper)});
    specs.push_back({"readout.b1", TensorKind::Bias, 1, h, layout::ro_b1_off(hyper)});
    specs.push_back({"readout.w2", TensorKind::Weight, 1, h, layout::ro_w2_off(hyper)});
    specs.push_back({"readout.b2", TensorKind::Bias, 1, 1, layout::ro_b2_off(hyper)});
    return specs;
}

std::size_t parameter_count(const HyperParams& hyper) {
    check_hyper(hyper);
    return layout::total(hyper);
}

}  // namespace floq

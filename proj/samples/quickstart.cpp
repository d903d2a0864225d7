// Trains BLNN on a small stochastic block model and prints probe accuracy,
// clustering scores and embedding compactness.
//
//   quickstart [epochs]

#include <cstdlib>
#include <iostream>

#include "blnn/blnn.hpp"

int main(int argc, char** argv) {
    using namespace blnn;

    const SbmResult sbm = generate_sbm(SbmConfig{});
    std::cout << "nodes " << sbm.graph.n_nodes() << ", edge homophily " << edge_homophily(sbm.graph, sbm.labels)
              << "\n";

    TrainConfig cfg;
    cfg.epochs = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 300;
    cfg.hidden_dim = 64;
    cfg.embed_dim = 32;
    cfg.predictor_hidden = 128;
    cfg.eval_every = 0;
    cfg.loss.variant = Variant::blnn;
    cfg.loss.tau = 1.0;

    const TrainResult r = train(sbm.graph, &sbm.labels, cfg, [](const LogRow& row) {
        if (row.epoch % 50 == 0) std::cout << "epoch " << row.epoch << " loss " << row.loss << "\n";
    });

    const Matrix h = embed(r.state, sbm.graph);
    const EvalReport rep = evaluate_embeddings(h, sbm.labels, 0);
    std::cout << "probe accuracy " << rep.accuracy << "\nnmi " << rep.nmi << "\nhomogeneity " << rep.homogeneity
              << "\ncompactness " << rep.compactness << "\n";
}

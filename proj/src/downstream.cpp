#include "neu/downstream.hpp"

#include <algorithm>
#include <cmath>

#include "neu/text.hpp"

namespace neu::task {

// token's type code in one hypothesis: code of the mention covering it, O otherwise
static int token_code(const bio::LabelSet& labels, const std::vector<int>& label_ids,
                      size_t token_index) {
    if (token_index >= label_ids.size()) fail("featurize: token index out of range");
    return labels.token_code(label_ids[token_index]);
}

std::vector<double> featurize_ner(const bio::LabelSet& labels,
                                  const std::vector<ner::Hypothesis>& beam, size_t token_index,
                                  size_t a) {
    const size_t C = labels.num_token_codes();
    std::vector<double> out(a * C, 0.0);
    for (size_t i = 0; i < a && i < beam.size(); ++i) {
        const int code = token_code(labels, beam[i].label_ids, token_index);
        out[i * C + static_cast<size_t>(code)] = beam[i].p_seq;
    }
    return out;
}

RerankedAlt to_alt(const el::RankedHypothesis& rh, size_t T) {
    RerankedAlt alt;
    alt.label_ids = rh.ner.label_ids;
    alt.p_seq = rh.ner.p_seq;
    alt.token_sim.assign(T, 0.0);
    for (size_t j = 0; j < rh.links.size(); ++j) {
        const auto& m = rh.links[j];
        const double s = j < rh.link_cosines.size() ? rh.link_cosines[j] : 0.0;
        for (size_t t = m.start; t < m.end && t < T; ++t) alt.token_sim[t] = s;
    }
    return alt;
}

std::vector<double> featurize_neu(const bio::LabelSet& labels,
                                  const std::vector<RerankedAlt>& reranked, size_t token_index,
                                  size_t a) {
    const size_t C = labels.num_token_codes();
    std::vector<double> out(2 * a * C, 0.0);
    for (size_t i = 0; i < a && i < reranked.size(); ++i) {
        const int code = token_code(labels, reranked[i].label_ids, token_index);
        out[2 * i * C + static_cast<size_t>(code)] = reranked[i].p_seq;
        out[(2 * i + 1) * C + static_cast<size_t>(code)] = reranked[i].token_sim[token_index];
    }
    return out;
}

double toy_domain_classifier(const std::vector<DomainExample>& train,
                             const std::vector<DomainExample>& test,
                             const ClassifierConfig& cfg) {
    if (train.empty() || test.empty()) fail("toy_domain_classifier: empty corpus");
    Vocab words(true);
    Vocab domains(false);
    size_t extra_dim = 0;
    for (const auto& ex : train) {
        for (const auto& t : ex.tokens) words.add(text::normalize_token(t));
        domains.add(ex.domain);
        if (!ex.extra.empty()) extra_dim = std::max(extra_dim, ex.extra[0].size());
    }
    for (const auto& ex : test) domains.add(ex.domain);

    Rng rng(cfg.seed ^ 0xd05f00dULL);
    nn::ParameterSet ps("neu.domain.v1");
    ps.add_init("emb", {words.size(), cfg.word_dim}, rng);
    nn::lstm_init(ps, "rnn", cfg.word_dim + extra_dim, cfg.hidden, rng);
    ps.add_init("out.W", {domains.size(), cfg.hidden}, rng);
    ps.add("out.b", {domains.size()});

    auto build_logits = [&](nn::Graph& g, const DomainExample& ex) {
        std::vector<nn::Var> xs;
        for (size_t t = 0; t < ex.tokens.size(); ++t) {
            nn::Var w = g.embed(ps.get("emb"), {words.id(text::normalize_token(ex.tokens[t]))});
            if (extra_dim > 0) {
                nn::Tensor extra({extra_dim});
                if (t < ex.extra.size()) {
                    if (ex.extra[t].size() != extra_dim)
                        fail("toy_domain_classifier: inconsistent extra feature dims");
                    std::copy(ex.extra[t].begin(), ex.extra[t].end(), extra.v.begin());
                }
                w = g.concat({w, g.input(std::move(extra))});
            }
            xs.push_back(w);
        }
        auto states = nn::lstm_run(g, ps, "rnn", xs, false);
        return g.affine(ps.get("out.W"), &ps.get("out.b"), states.back());
    };

    nn::AdamState adam;
    adam.lr = cfg.lr;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(cfg.seed ^ 0xbeefULL);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        size_t done = 0;
        while (done < order.size()) {
            const size_t batch = std::min(cfg.batch_size, order.size() - done);
            ps.zero_grads();
            nn::Graph g(true);
            std::vector<nn::Var> losses;
            for (size_t b = 0; b < batch; ++b) {
                const auto& ex = train[order[done + b]];
                if (ex.tokens.empty()) continue;
                nn::Var logits = build_logits(g, ex);
                const size_t gold = static_cast<size_t>(domains.id(ex.domain));
                nn::Var nll = g.sub(g.logsumexp(logits), g.slice(logits, gold, 1));
                losses.push_back(g.scale(nll, 1.0 / static_cast<double>(batch)));
            }
            done += batch;
            if (losses.empty()) continue;
            nn::Var loss = losses.size() == 1 ? losses[0] : g.sum(g.concat(losses));
            g.backward(loss);
            adam.step(ps);
        }
        adam.end_epoch();
    }

    size_t correct = 0;
    for (const auto& ex : test) {
        if (ex.tokens.empty()) continue;
        nn::Graph g(false);
        nn::Var logits = build_logits(g, ex);
        size_t best = 0;
        for (size_t i = 1; i < logits->size(); ++i)
            if (logits->val.v[i] > logits->val.v[best]) best = i;
        if (domains.items()[best] == ex.domain) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace neu::task

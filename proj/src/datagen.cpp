#include "neu/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "neu/text.hpp"

namespace neu::datagen {

namespace {

const std::vector<std::string> kFirstNames = {
    "maria", "carla",  "camila", "john",  "lena",  "sofia", "david", "emma",
    "lucas", "nora",   "felix",  "iris",  "oscar", "ruby",  "theo",  "alma",
    "viktor", "zara",  "pablo",  "mona",  "elio",  "dana",  "milo",  "petra"};

const std::vector<std::string> kLastNames = {
    "cabello", "smith",  "lopez",   "stone",  "rivera",  "walsh", "mendez", "brook",
    "castillo", "navarro", "quinn", "ortega", "blake",   "moreno", "ferris", "lang",
    "serrano", "pike",   "vidal",   "marsh",  "ibarra",  "cole",  "duran",  "haze"};

const std::vector<std::string> kTitleWords = {
    "midnight", "river",  "golden", "echo",   "storm",  "velvet", "shadow", "ember",
    "crystal",  "wild",   "silver", "dawn",   "neon",   "hollow", "crimson", "winter",
    "lunar",    "static", "royal",  "fable",  "iron",   "mirror", "canyon", "saffron",
    "indigo",   "harbor", "thunder", "paper", "cedar",  "aurora"};

const std::vector<std::string> kCities = {
    "dallas",  "denver", "austin",  "boston",  "chicago", "seattle", "miami",
    "portland", "houston", "phoenix", "atlanta", "oakland", "memphis", "tulsa"};

const std::vector<std::string> kMascots = {"giants", "cowboys", "hawks",  "bears", "sharks",
                                           "wolves", "kings",   "titans", "comets", "rangers"};

template <typename T>
const T& pick(const std::vector<T>& xs, Rng& rng) {
    return xs[rng.uniform_index(xs.size())];
}

// popularity with a long-ish tail
double sample_popularity(Rng& rng) { return std::exp(rng.uniform(0.0, 2.0)); }

std::string initialism(const std::string& name) {
    std::string out;
    for (const auto& tok : text::normalize_tokens(name)) out += tok[0];
    return out;
}

// single-token misspelling used for the homophone table
std::string mutate_token(const std::string& tok, Rng& rng) {
    static const std::string vowels = "aeiou";
    std::string out = tok;
    if (rng.bernoulli(0.5)) {
        // swap one vowel for another
        for (size_t attempts = 0; attempts < 8; ++attempts) {
            const size_t i = rng.uniform_index(out.size());
            if (vowels.find(out[i]) != std::string::npos) {
                char repl = vowels[rng.uniform_index(vowels.size())];
                if (repl != out[i]) {
                    out[i] = repl;
                    return out;
                }
            }
        }
    }
    // suffix mutation
    out.push_back(out.back() == 'o' ? 'w' : 'o');
    return out;
}

}  // namespace

kb::KnowledgeBase synth_kb(const GenConfig& cfg, Rng& rng) {
    kb::KnowledgeBase out;
    int next_id = 1;
    auto make_id = [&]() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "e%04d", next_id++);
        return std::string(buf);
    };
    std::set<std::string> used_names;
    auto fresh = [&](auto&& make_name) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            std::string name = make_name();
            if (used_names.insert(name).second) return name;
        }
        fail("synth_kb: could not find a fresh name (pools too small)");
    };

    auto add = [&](const std::string& type, const std::string& name, double pop,
                   std::vector<std::string> aliases = {},
                   std::vector<std::string> related = {}) {
        kb::Entity e;
        e.id = make_id();
        e.canonical_name = name;
        e.entity_type = type;
        e.popularity = pop;
        e.aliases = std::move(aliases);
        e.related_ids = std::move(related);
        out.add_entity(std::move(e));
        return out.entities().back().id;
    };

    // persons
    std::vector<std::string> person_names;
    for (size_t i = 0; i < cfg.persons; ++i) {
        std::string name = fresh([&] { return pick(kFirstNames, rng) + " " + pick(kLastNames, rng); });
        person_names.push_back(name);
        add("person", name, sample_popularity(rng));
    }

    // artists, some with a confusable sibling (same last name, near first name)
    std::vector<std::string> artist_ids;
    size_t siblings_made = 0;
    for (size_t i = 0; i < cfg.artists; ++i) {
        std::string first = pick(kFirstNames, rng);
        std::string last = pick(kLastNames, rng);
        std::string name = fresh([&] { return first + " " + last; });
        first = text::normalize_tokens(name)[0];
        last = text::normalize_tokens(name)[1];
        artist_ids.push_back(add("artist", name, sample_popularity(rng)));
        if (siblings_made < cfg.sibling_artists) {
            std::string sibling_first = mutate_token(first, rng);
            const std::string sibling = sibling_first + " " + last;
            if (!used_names.count(sibling)) {
                used_names.insert(sibling);
                artist_ids.push_back(add("artist", sibling, sample_popularity(rng)));
                ++siblings_made;
            }
        }
    }

    // songs, each related to an artist
    for (size_t i = 0; i < cfg.songs; ++i) {
        std::string name = fresh([&] {
            switch (rng.uniform_int(3)) {
                case 0: return "the " + pick(kTitleWords, rng) + " of " + pick(kTitleWords, rng);
                case 1: return pick(kTitleWords, rng) + " " + pick(kTitleWords, rng);
                default: return pick(kTitleWords, rng);
            }
        });
        std::vector<std::string> aliases;
        const auto toks = text::normalize_tokens(name);
        if (toks.size() >= 3) aliases.push_back(initialism(name));
        add("song", name, sample_popularity(rng), std::move(aliases),
            {pick(artist_ids, rng)});
    }

    // movies; the ambiguous ones reuse a person name but carry high popularity
    size_t ambiguous_made = 0;
    for (size_t i = 0; i < cfg.movies; ++i) {
        std::string name;
        bool ambiguous = false;
        if (ambiguous_made < cfg.ambiguous_movies && ambiguous_made < person_names.size()) {
            name = person_names[ambiguous_made];
            ++ambiguous_made;
            ambiguous = true;
        } else {
            name = fresh([&] {
                switch (rng.uniform_int(4)) {
                    case 0: return "doctor " + pick(kLastNames, rng);
                    case 1: return "the " + pick(kTitleWords, rng) + " " + pick(kTitleWords, rng);
                    case 2: return pick(kTitleWords, rng) + " wars";
                    default: return "the last " + pick(kTitleWords, rng);
                }
            });
        }
        std::vector<std::string> aliases;
        const auto toks = text::normalize_tokens(name);
        if (toks.size() >= 3) aliases.push_back(initialism(name));
        add("movie", name, sample_popularity(rng) * (ambiguous ? 12.0 : 1.0), std::move(aliases));
    }

    // shows
    for (size_t i = 0; i < cfg.shows; ++i) {
        std::string name = fresh([&] {
            switch (rng.uniform_int(3)) {
                case 0: return "the " + pick(kTitleWords, rng) + " show";
                case 1: return pick(kTitleWords, rng) + " and " + pick(kTitleWords, rng);
                default: return pick(kTitleWords, rng) + "s";
            }
        });
        add("show", name, sample_popularity(rng));
    }

    // leagues of teams; mascots overlap across leagues, the mascot alias is
    // deliberately ambiguous and same-league teams are related
    std::vector<std::vector<std::string>> league_team_ids(cfg.leagues);
    for (size_t l = 0; l < cfg.leagues; ++l) {
        std::vector<std::string> cities = kCities;
        rng.shuffle(cities);
        for (size_t t = 0; t < cfg.teams_per_league; ++t) {
            const std::string& mascot = kMascots[(l * 2 + t) % kMascots.size()];
            std::string name = fresh([&] { return cities[t % cities.size()] + " " + mascot; });
            league_team_ids[l].push_back(
                add("team", name, sample_popularity(rng), {mascot}));
        }
    }
    // relation pointers are directed in the file; related() closes them.
    // Entities are immutable once added, so rebuild the KB with the lists.
    kb::KnowledgeBase rebuilt;
    std::map<std::string, std::vector<std::string>> relate;
    for (size_t l = 0; l < cfg.leagues; ++l)
        for (size_t i = 0; i < league_team_ids[l].size(); ++i)
            for (size_t j = i + 1; j < league_team_ids[l].size(); ++j)
                relate[league_team_ids[l][i]].push_back(league_team_ids[l][j]);
    for (const auto& e : out.entities()) {
        kb::Entity copy = e;
        auto it = relate.find(e.id);
        if (it != relate.end())
            copy.related_ids.insert(copy.related_ids.end(), it->second.begin(), it->second.end());
        rebuilt.add_entity(std::move(copy));
    }
    rebuilt.validate();

    // homophone-style correction table over name tokens; some entries sit
    // below the default confidence threshold on purpose
    std::set<std::string> tokens;
    for (const auto& e : rebuilt.entities())
        for (const auto& t : text::normalize_tokens(e.canonical_name)) tokens.insert(t);
    for (const auto& t : tokens) {
        if (t.size() < 4 || !rng.bernoulli(0.4)) continue;
        const std::string variant = mutate_token(t, rng);
        if (tokens.count(variant)) continue;
        rebuilt.add_correction(variant, t, rng.uniform(0.8, 0.99));
    }

    // singular -> plural synonyms for tokens whose plural occurs in the KB
    for (const auto& t : tokens) {
        if (t.size() < 3 || t.back() == 's') continue;
        if (tokens.count(t + "s")) rebuilt.add_synonym(t, {t + "s"});
    }

    return rebuilt;
}

std::vector<Template> builtin_templates() {
    auto tpl = [](const std::string& domain, const std::string& text) {
        Template t;
        t.domain = domain;
        std::istringstream is(text);
        std::string tok;
        while (is >> tok) t.pattern.push_back(tok);
        return t;
    };
    return {
        tpl("music", "play {song}"),
        tpl("music", "play {song} by {artist}"),
        tpl("music", "play some {artist}"),
        tpl("music", "i want to hear {song}"),
        tpl("music", "put on {song}"),
        tpl("movie", "watch {movie}"),
        tpl("movie", "play {movie}"),
        tpl("movie", "show me {movie}"),
        tpl("movie", "{movie}"),
        tpl("person", "call {person}"),
        tpl("person", "text {person}"),
        tpl("person", "message {person}"),
        tpl("person", "call {person} now"),
        tpl("sports", "score for the {team} game"),
        tpl("sports", "{team} versus {team}"),
        tpl("sports", "did the {team} win"),
        tpl("sports", "when do the {team} play"),
        tpl("tv", "put on {show}"),
        tpl("tv", "watch {show}"),
    };
}

namespace {

struct MentionDraft {
    size_t slot_position;  // token index where the mention starts (pre-noise)
    std::string type;
    std::string entity_id;
    std::vector<std::string> tokens;
};

// applies one weighted-random applicable op; returns false if none applies
bool apply_noise_op(const kb::KnowledgeBase& kb, MentionDraft& m, const NoiseSpec& spec,
                    Rng& rng) {
    struct Op {
        double weight;
        int kind;  // 0 alias, 1 homophone, 2 char_sub, 3 transpose, 4 truncate
    };
    std::vector<Op> ops;
    const auto& entity = kb.entity(m.entity_id);
    if (spec.alias > 0 && !entity.aliases.empty()) ops.push_back({spec.alias, 0});
    if (spec.homophone > 0) {
        bool has_variant = false;
        for (const auto& [from, corr] : kb.correction_table()) {
            for (const auto& t : m.tokens)
                if (corr.to == t) {
                    has_variant = true;
                    break;
                }
            if (has_variant) break;
        }
        if (has_variant) ops.push_back({spec.homophone, 1});
    }
    if (spec.char_sub > 0) ops.push_back({spec.char_sub, 2});
    if (spec.transpose > 0) {
        for (const auto& t : m.tokens)
            if (t.size() >= 2) {
                ops.push_back({spec.transpose, 3});
                break;
            }
    }
    if (spec.truncate > 0 && m.tokens.size() >= 2) ops.push_back({spec.truncate, 4});
    if (ops.empty()) return false;
    double total = 0.0;
    for (const auto& o : ops) total += o.weight;
    double r = rng.uniform() * total;
    int kind = ops.back().kind;
    for (const auto& o : ops) {
        if (r < o.weight) {
            kind = o.kind;
            break;
        }
        r -= o.weight;
    }
    switch (kind) {
        case 0: {
            const auto& alias = entity.aliases[rng.uniform_index(entity.aliases.size())];
            m.tokens = text::normalize_tokens(alias);
            return true;
        }
        case 1: {
            std::vector<std::pair<size_t, std::string>> options;
            for (size_t i = 0; i < m.tokens.size(); ++i)
                for (const auto& [from, corr] : kb.correction_table())
                    if (corr.to == m.tokens[i]) options.push_back({i, from});
            if (options.empty()) return false;
            const auto& [i, variant] = options[rng.uniform_index(options.size())];
            m.tokens[i] = variant;
            return true;
        }
        case 2: {
            size_t ti = rng.uniform_index(m.tokens.size());
            if (m.tokens[ti].empty()) return false;
            size_t ci = rng.uniform_index(m.tokens[ti].size());
            char repl = static_cast<char>('a' + rng.uniform_int(26));
            if (repl == m.tokens[ti][ci]) repl = repl == 'z' ? 'a' : static_cast<char>(repl + 1);
            m.tokens[ti][ci] = repl;
            return true;
        }
        case 3: {
            std::vector<size_t> eligible;
            for (size_t i = 0; i < m.tokens.size(); ++i)
                if (m.tokens[i].size() >= 2) eligible.push_back(i);
            if (eligible.empty()) return false;
            const size_t ti = eligible[rng.uniform_index(eligible.size())];
            const size_t ci = rng.uniform_index(m.tokens[ti].size() - 1);
            std::swap(m.tokens[ti][ci], m.tokens[ti][ci + 1]);
            return true;
        }
        case 4:
            m.tokens.pop_back();
            return true;
        default: return false;
    }
}

}  // namespace

std::vector<bio::Utterance> generate_corpus(const kb::KnowledgeBase& kb,
                                            const std::vector<Template>& templates,
                                            const NoiseSpec& noise, double noisy_fraction,
                                            size_t n, uint64_t seed, const EntityPools* pools) {
    if (templates.empty()) fail("generate_corpus: no templates");
    Rng rng(seed);

    // entity ids per type, optionally restricted to the given pools
    std::map<std::string, std::vector<const kb::Entity*>> by_type;
    for (const auto& e : kb.entities()) {
        if (pools) {
            auto it = pools->find(e.entity_type);
            if (it == pools->end() ||
                std::find(it->second.begin(), it->second.end(), e.id) == it->second.end())
                continue;
        }
        by_type[e.entity_type].push_back(&e);
    }
    for (const auto& t : templates)
        for (const auto& tok : t.pattern)
            if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
                const std::string type = tok.substr(1, tok.size() - 2);
                if (by_type[type].empty())
                    fail("generate_corpus: template slot '{", type, "}' has no matching entities");
            }

    // popularity-weighted entity draw
    auto draw_entity = [&](const std::string& type, const kb::Entity* exclude,
                           bool same_league_as_exclude) -> const kb::Entity* {
        const auto& pool = by_type[type];
        std::vector<const kb::Entity*> eligible;
        double total = 0.0;
        for (const kb::Entity* e : pool) {
            if (exclude && e->id == exclude->id) continue;
            if (same_league_as_exclude && exclude && !kb.related(e->id, exclude->id)) continue;
            eligible.push_back(e);
            total += e->popularity;
        }
        if (eligible.empty()) return nullptr;
        double r = rng.uniform() * total;
        for (const kb::Entity* e : eligible) {
            if (r < e->popularity) return e;
            r -= e->popularity;
        }
        return eligible.back();
    };

    std::vector<bio::Utterance> corpus;
    corpus.reserve(n);
    while (corpus.size() < n) {
        const Template& t = templates[rng.uniform_index(templates.size())];
        bio::Utterance u;
        std::vector<MentionDraft> drafts;
        const kb::Entity* first_team = nullptr;
        bool ok = true;
        for (const auto& tok : t.pattern) {
            if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
                const std::string type = tok.substr(1, tok.size() - 2);
                const kb::Entity* e = nullptr;
                if (type == "team" && first_team) {
                    // second team of a versus-style template: same league
                    e = draw_entity(type, first_team, true);
                    if (!e) e = draw_entity(type, first_team, false);
                } else {
                    e = draw_entity(type, nullptr, false);
                }
                if (!e) {
                    ok = false;
                    break;
                }
                if (type == "team" && !first_team) first_team = e;
                MentionDraft d;
                d.slot_position = u.tokens.size();
                d.type = type;
                d.entity_id = e->id;
                d.tokens = text::normalize_tokens(e->canonical_name);
                drafts.push_back(d);
                u.tokens.push_back("\x01");  // placeholder, replaced below
            } else {
                u.tokens.push_back(tok);
            }
        }
        if (!ok) continue;

        // ambiguous short form for the second team mention
        if (first_team && drafts.size() >= 2 && drafts[0].type == "team" &&
            drafts[1].type == "team" && rng.bernoulli(0.6)) {
            const auto& e = kb.entity(drafts[1].entity_id);
            if (!e.aliases.empty())
                drafts[1].tokens = text::normalize_tokens(e.aliases[0]);
        }

        const bool want_noise = rng.bernoulli(noisy_fraction);
        bool noised = false;
        if (want_noise && !drafts.empty()) {
            MentionDraft& victim = drafts[rng.uniform_index(drafts.size())];
            for (int attempt = 0; attempt < 8 && !noised; ++attempt)
                noised = apply_noise_op(kb, victim, noise, rng);
        }

        // splice mention tokens over the placeholders
        std::vector<std::string> tokens;
        std::vector<std::string> labels;
        std::vector<bio::Link> links;
        size_t draft_i = 0;
        for (const auto& tok : u.tokens) {
            if (tok == "\x01") {
                const auto& d = drafts[draft_i++];
                if (d.tokens.empty()) continue;
                bio::Link link;
                link.start = tokens.size();
                link.type = d.type;
                link.entity_id = d.entity_id;
                for (size_t i = 0; i < d.tokens.size(); ++i) {
                    tokens.push_back(d.tokens[i]);
                    labels.push_back((i == 0 ? "B-" : "I-") + d.type);
                }
                link.end = tokens.size();
                links.push_back(link);
            } else {
                tokens.push_back(tok);
                labels.push_back("O");
            }
        }
        if (tokens.empty()) continue;
        bio::Utterance final_u;
        final_u.tokens = std::move(tokens);
        final_u.labels = std::move(labels);
        final_u.links = std::move(links);
        final_u.tags.push_back("domain:" + t.domain);
        if (noised) final_u.tags.push_back("noisy");
        bool related = false;
        for (size_t i = 0; i < final_u.links.size() && !related; ++i)
            for (size_t j = i + 1; j < final_u.links.size() && !related; ++j)
                related = kb.related(final_u.links[i].entity_id, final_u.links[j].entity_id);
        if (related) final_u.tags.push_back("related");
        corpus.push_back(std::move(final_u));
    }
    return corpus;
}

Generated generate(const GenConfig& cfg) {
    if (cfg.split.size() != 3) fail("generate: split must have train/dev/test fractions");
    Rng rng(cfg.seed);
    Generated out;
    out.kb = synth_kb(cfg, rng);
    const auto templates = builtin_templates();

    const size_t n_train = static_cast<size_t>(static_cast<double>(cfg.n) * cfg.split[0]);
    const size_t n_dev = static_cast<size_t>(static_cast<double>(cfg.n) * cfg.split[1]);
    const size_t n_test = cfg.n - n_train - n_dev;

    if (!cfg.entity_split) {
        auto corpus = generate_corpus(out.kb, templates, cfg.noise, cfg.noisy_fraction, cfg.n,
                                      rng.fork_seed());
        out.train.assign(corpus.begin(), corpus.begin() + static_cast<long>(n_train));
        out.dev.assign(corpus.begin() + static_cast<long>(n_train),
                       corpus.begin() + static_cast<long>(n_train + n_dev));
        out.test.assign(corpus.begin() + static_cast<long>(n_train + n_dev), corpus.end());
        return out;
    }

    // disjoint entity pools per type: train/dev sample one side, test the other
    EntityPools train_pool, test_pool;
    std::map<std::string, std::vector<std::string>> ids_by_type;
    for (const auto& e : out.kb.entities()) ids_by_type[e.entity_type].push_back(e.id);
    for (auto& [type, ids] : ids_by_type) {
        rng.shuffle(ids);
        const size_t cut = std::max<size_t>(1, ids.size() * 3 / 5);
        train_pool[type].assign(ids.begin(), ids.begin() + static_cast<long>(std::min(cut, ids.size() - 1)));
        test_pool[type].assign(ids.begin() + static_cast<long>(std::min(cut, ids.size() - 1)), ids.end());
    }
    auto train_dev = generate_corpus(out.kb, templates, cfg.noise, cfg.noisy_fraction,
                                     n_train + n_dev, rng.fork_seed(), &train_pool);
    out.train.assign(train_dev.begin(), train_dev.begin() + static_cast<long>(n_train));
    out.dev.assign(train_dev.begin() + static_cast<long>(n_train), train_dev.end());
    out.test = generate_corpus(out.kb, templates, cfg.noise, cfg.noisy_fraction, n_test,
                               rng.fork_seed(), &test_pool);
    return out;
}

}  // namespace neu::datagen

#include "factgap/analytics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/strings.h"

namespace factgap {

namespace fs = std::filesystem;

namespace {

using GroupKey = std::pair<ResourceCategory, ExperimentTag>;

double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values, double mean) {
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return std::sqrt(sq / static_cast<double>(values.size()));
}

/// Scores grouped by (category, mode), each group sorted for a stable fold.
std::map<GroupKey, std::vector<const EntityScore*>> group_scores(std::span<const EntityScore> scores) {
    std::map<GroupKey, std::vector<const EntityScore*>> groups;
    for (const auto& s : scores) {
        const auto& info = lookup_language(s.language);
        if (s.n_templates_scored == 0) continue;
        groups[{info.category, s.mode}].push_back(&s);
    }
    for (auto& [_, members] : groups) {
        std::ranges::sort(members, [](const EntityScore* a, const EntityScore* b) {
            return std::tie(a->entity_id, a->language, a->model) <
                   std::tie(b->entity_id, b->language, b->model);
        });
    }
    return groups;
}

}  // namespace

std::vector<CategoryRollup> rollup_categories(std::span<const EntityScore> scores) {
    std::vector<CategoryRollup> out;
    for (const auto& [key, members] : group_scores(scores)) {
        std::vector<double> means;
        std::vector<double> facts;
        for (const auto* s : members) {
            means.push_back(s->mean);
            facts.push_back(s->mean_num_facts);
        }
        CategoryRollup row;
        row.category = key.first;
        row.mode = key.second;
        row.mean_score = mean_of(means);
        row.std_score = population_std(means, row.mean_score);
        row.mean_num_facts = mean_of(facts);
        row.n_entities = members.size();
        out.push_back(row);
    }
    return out;
}

std::vector<TemplateSpreadRollup> rollup_template_spread(std::span<const EntityScore> scores) {
    std::vector<TemplateSpreadRollup> out;
    for (const auto& [key, members] : group_scores(scores)) {
        std::vector<double> stds;
        for (const auto* s : members) {
            if (s->n_templates_scored >= 2) stds.push_back(s->std_dev);
        }
        if (stds.empty()) continue;
        out.push_back({key.first, key.second, mean_of(stds), stds.size()});
    }
    return out;
}

ScoreMatrix score_matrix(std::span<const EntityScore> scores, std::span<const std::string> languages,
                         std::span<const std::string> models, ExperimentTag mode) {
    ScoreMatrix m;
    m.mode = mode;
    m.languages.assign(languages.begin(), languages.end());
    m.models.assign(models.begin(), models.end());
    std::map<std::pair<std::string, std::string>, std::vector<const EntityScore*>> cells;
    for (const auto& s : scores) {
        if (s.mode != mode || s.n_templates_scored == 0) continue;
        cells[{s.language, s.model}].push_back(&s);
    }
    for (const auto& language : m.languages) {
        auto& row = m.cells.emplace_back();
        for (const auto& model : m.models) {
            auto it = cells.find({language, model});
            if (it == cells.end()) {
                row.emplace_back(std::nullopt);
                continue;
            }
            auto members = it->second;
            std::ranges::sort(members, {}, &EntityScore::entity_id);
            std::vector<double> means;
            for (const auto* s : members) means.push_back(s->mean);
            row.emplace_back(mean_of(means));
        }
    }
    return m;
}

ValidatorMetrics validator_metrics(std::span<const PredictedResponse> predicted,
                                   std::span<const HumanAnnotatedFact> gold,
                                   PositiveClass positive) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const HumanAnnotatedFact*>> gold_by_id;
    for (const auto& g : gold) {
        auto [it, inserted] = gold_by_id.try_emplace(g.response_id);
        if (inserted) order.push_back(g.response_id);
        it->second.push_back(&g);
    }
    std::map<std::string, const PredictedResponse*> predicted_by_id;
    for (const auto& p : predicted) {
        if (!predicted_by_id.emplace(p.response_id, &p).second) {
            throw ValidationError("duplicate predicted response '" + p.response_id + "'");
        }
        if (!gold_by_id.contains(p.response_id)) {
            throw ValidationError("predicted response '" + p.response_id + "' has no gold labels");
        }
    }

    ValidatorMetrics m;
    const bool want = positive == PositiveClass::Supported;
    double error_sum = 0.0;
    for (const auto& id : order) {
        const auto& facts = gold_by_id.at(id);
        auto it = predicted_by_id.find(id);
        if (it == predicted_by_id.end()) {
            throw ValidationError("no predictions for gold response '" + id + "'");
        }
        const auto& verdicts = it->second->verdicts;
        if (verdicts.size() != facts.size()) {
            throw ValidationError("response '" + id + "': " + std::to_string(verdicts.size()) +
                                  " predicted facts vs " + std::to_string(facts.size()) + " gold");
        }
        std::size_t gold_supported = 0;
        std::size_t predicted_supported = 0;
        for (std::size_t i = 0; i < facts.size(); ++i) {
            if (trim_view(facts[i]->fact) != trim_view(verdicts[i].fact.text)) {
                throw ValidationError("response '" + id + "' fact " + std::to_string(i) +
                                      " differs between prediction and gold");
            }
            const bool g = facts[i]->gold_supported;
            const bool p = verdicts[i].supported;
            gold_supported += g ? 1 : 0;
            predicted_supported += p ? 1 : 0;
            const bool gp = g == want;
            const bool pp = p == want;
            if (gp && pp) ++m.true_positives;
            else if (!gp && pp) ++m.false_positives;
            else if (gp && !pp) ++m.false_negatives;
            else ++m.true_negatives;
        }
        const auto n = static_cast<double>(facts.size());
        error_sum += std::abs(static_cast<double>(predicted_supported) / n -
                              static_cast<double>(gold_supported) / n);
    }
    m.responses = order.size();
    m.error_rate = m.responses == 0 ? 0.0 : error_sum / static_cast<double>(m.responses);
    const auto denom = 2 * m.true_positives + m.false_positives + m.false_negatives;
    m.micro_f1 = denom == 0 ? 100.0
                            : 100.0 * 2.0 * static_cast<double>(m.true_positives) /
                                  static_cast<double>(denom);
    return m;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json") return ReportFormat::Json;
    throw ValidationError("unknown report format '" + std::string(text) + "' (csv|json)");
}

Report build_report(std::span<const EntityScore> scores) {
    Report report;
    report.categories = rollup_categories(scores);
    report.spreads = rollup_template_spread(scores);
    std::set<ExperimentTag> modes;
    std::set<std::string> models;
    std::set<std::string> present;
    for (const auto& s : scores) {
        if (s.n_templates_scored == 0) continue;
        modes.insert(s.mode);
        models.insert(s.model);
        present.insert(s.language);
    }
    std::vector<std::string> languages;
    for (const auto& info : language_table()) {
        if (present.contains(std::string(info.code))) languages.emplace_back(info.code);
    }
    const std::vector<std::string> model_list(models.begin(), models.end());
    for (auto mode : modes) {
        report.matrices.push_back(score_matrix(scores, languages, model_list, mode));
    }
    return report;
}

namespace {

std::string fixed6(double v) { return fmt::format("{:.6f}", v); }

double round6(double v) { return std::round(v * 1e6) / 1e6; }

void write(const fs::path& path, const std::string& contents, std::vector<fs::path>& written) {
    write_file_atomic(path, contents);
    written.push_back(path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::vector<fs::path> emit_report(const Report& report, ReportFormat format, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    const bool csv = format == ReportFormat::Csv;
    const std::string ext = csv ? ".csv" : ".json";

    if (csv) {
        std::string text = "category,mode,mean_score,std_score_across_entities,mean_num_facts,n_entities\n";
        for (const auto& r : report.categories) {
            text += fmt::format("{},{},{},{},{},{}\n", to_string(r.category), to_string(r.mode),
                                fixed6(r.mean_score), fixed6(r.std_score),
                                fixed6(r.mean_num_facts), r.n_entities);
        }
        write(out_dir / "category_rollup.csv", text, written);

        text = "category,mode,mean_of_template_stds,n_entities\n";
        for (const auto& r : report.spreads) {
            text += fmt::format("{},{},{},{}\n", to_string(r.category), to_string(r.mode),
                                fixed6(r.mean_of_template_stds), r.n_entities);
        }
        write(out_dir / "template_spread.csv", text, written);
    } else {
        json rows = json::array();
        for (const auto& r : report.categories) {
            rows.push_back({{"category", to_string(r.category)},
                            {"mode", to_string(r.mode)},
                            {"mean_score", round6(r.mean_score)},
                            {"std_score_across_entities", round6(r.std_score)},
                            {"mean_num_facts", round6(r.mean_num_facts)},
                            {"n_entities", r.n_entities}});
        }
        write(out_dir / "category_rollup.json", dump({{"rows", rows}}), written);

        rows = json::array();
        for (const auto& r : report.spreads) {
            rows.push_back({{"category", to_string(r.category)},
                            {"mode", to_string(r.mode)},
                            {"mean_of_template_stds", round6(r.mean_of_template_stds)},
                            {"n_entities", r.n_entities}});
        }
        write(out_dir / "template_spread.json", dump({{"rows", rows}}), written);
    }

    for (const auto& m : report.matrices) {
        const std::string stem = "matrix_" + std::string(to_string(m.mode));
        if (csv) {
            std::string grid = "language";
            for (const auto& model : m.models) grid += "," + model;
            grid += '\n';
            std::string plot = "language,model,score\n";
            for (std::size_t r = 0; r < m.languages.size(); ++r) {
                grid += m.languages[r];
                for (std::size_t c = 0; c < m.models.size(); ++c) {
                    const auto& cell = m.cells[r][c];
                    grid += "," + (cell ? fixed6(*cell) : std::string("null"));
                    if (cell) {
                        plot += fmt::format("{},{},{}\n", m.languages[r], m.models[c], fixed6(*cell));
                    }
                }
                grid += '\n';
            }
            write(out_dir / (stem + ".csv"), grid, written);
            write(out_dir / (stem + ".plot.csv"), plot, written);
        } else {
            json cells = json::array();
            json plot = json::array();
            for (std::size_t r = 0; r < m.languages.size(); ++r) {
                json row = json::array();
                for (std::size_t c = 0; c < m.models.size(); ++c) {
                    const auto& cell = m.cells[r][c];
                    row.push_back(cell ? json(round6(*cell)) : json(nullptr));
                    if (cell) {
                        plot.push_back({{"language", m.languages[r]},
                                        {"model", m.models[c]},
                                        {"score", round6(*cell)}});
                    }
                }
                cells.push_back(std::move(row));
            }
            write(out_dir / (stem + ".json"),
                  dump({{"mode", to_string(m.mode)},
                        {"languages", m.languages},
                        {"models", m.models},
                        {"cells", std::move(cells)}}),
                  written);
            write(out_dir / (stem + ".plot.json"), dump({{"points", std::move(plot)}}), written);
        }
    }
    std::ranges::sort(written);
    return written;
}

}  // namespace factgap

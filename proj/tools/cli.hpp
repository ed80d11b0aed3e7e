#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "truthprobe/analysis.hpp"
#include "truthprobe/probes.hpp"

namespace truthprobe::cli {

struct RunConfig {
    std::string dataset_path;
    std::string battery_path;
    std::string bundle_path;
    std::string output_path;
    double lambda = 1.0;
    double ratio = 0.8;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    std::vector<ProbeKind> kinds{ProbeKind::lr, ProbeKind::mm, ProbeKind::ttpd};
    std::vector<GroupKey> group_keys{GroupKey::entity, GroupKey::polarity};
    std::vector<Entity> entities{kAllEntities.begin(), kAllEntities.end()};
    PromptCondition condition = PromptCondition::default_;
    double cutoff = 0.5;
    unsigned threads = 0;
};

// Subcommands: expand, train, eval, report, consistency. Returns the process
// exit status; 0 iff every requested output was written.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_expand(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_report(const RunConfig& cfg, std::ostream& out);
int cmd_consistency(const RunConfig& cfg, std::ostream& out);

}  // namespace truthprobe::cli

// Two-moons comparison of LapKLR and plain KLR with a handful of labels.
//
//   two_moons_demo [labels_per_class] [seeds] [gamma] [k] [lambda1] [lambda2]

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <vector>

#include "lapklr/data_io.hpp"
#include "lapklr/model.hpp"
#include "lapklr/synthetic.hpp"

using namespace lapklr;

namespace {

double unlabeled_accuracy(const TrainedModel& m, const LabeledSet& data, const std::vector<int>& truth) {
    const Vector f = predict_score_support(m);
    int correct = 0;
    for (Index i = data.labeled_count(); i < data.size(); ++i)
        correct += (f(i) > 0.0 ? 1 : 0) == truth[static_cast<std::size_t>(i)];
    return static_cast<double>(correct) / static_cast<double>(data.unlabeled_count());
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int main(int argc, char** argv) {
    const int per_class = argc > 1 ? std::atoi(argv[1]) : 1;
    const int seeds = argc > 2 ? std::atoi(argv[2]) : 20;
    const double gamma = argc > 3 ? std::atof(argv[3]) : 10.0;
    const int k = argc > 4 ? std::atoi(argv[4]) : 10;
    const double lambda1 = argc > 5 ? std::atof(argv[5]) : 1e-4;
    const double lambda2 = argc > 6 ? std::atof(argv[6]) : 1e-1;

    GraphConfig graph;
    graph.k = k;
    OptimizerConfig opt;

    std::vector<double> acc_lap, acc_klr;
    for (int seed = 0; seed < seeds; ++seed) {
        const TwoMoons moons = make_two_moons(200, 0.1, static_cast<std::uint64_t>(seed));
        const auto sample = balanced_label_sample(moons.y, SplitSpec{static_cast<std::uint64_t>(seed), per_class, 0.5});
        std::vector<double> labels;
        std::vector<int> truth;
        for (std::size_t i = 0; i < sample.labeled.size(); ++i) {
            labels.push_back(i < static_cast<std::size_t>(per_class) ? 1.0 : 0.0);
            truth.push_back(moons.y[static_cast<std::size_t>(sample.labeled[i])]);
        }
        for (Index u : sample.unlabeled) truth.push_back(moons.y[static_cast<std::size_t>(u)]);
        const LabeledSet data = LabeledSet::from_indices(moons.X, sample.labeled, labels, sample.unlabeled);

        const auto lap = fit(data, KernelSpec::rbf(gamma), graph, Hyperparams{lambda1, lambda2}, opt);
        const auto klr = fit(data, KernelSpec::rbf(gamma), graph, Hyperparams{lambda1, 0.0}, opt);
        acc_lap.push_back(unlabeled_accuracy(lap, data, truth));
        acc_klr.push_back(unlabeled_accuracy(klr, data, truth));
        std::cout << "seed " << seed << "  lapklr " << acc_lap.back() << " (" << lap.iterations << " it, "
                  << to_string(lap.trace.stop_reason) << ")  klr " << acc_klr.back() << " (" << klr.iterations
                  << " it)\n";
    }
    std::cout << "median unlabeled accuracy: lapklr " << median(acc_lap) << "  klr " << median(acc_klr) << '\n';
    return 0;
}

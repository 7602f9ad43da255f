#include "triage/qseq/vote.hpp"

#include "triage/error.hpp"

namespace triage::qseq {

Votes forest_vote(const forest::CohortForest& forest,
                  const forest::EncodedRow& row) {
  if (row.values.size() != forest.schema.size() ||
      row.known.size() != forest.schema.size()) {
    throw ShapeError("encoded row does not match the forest schema");
  }
  Votes votes;
  for (const forest::DecisionTree& tree : forest.trees) {
    int i = 0;
    while (!tree.nodes[i].is_leaf()) {
      const forest::TreeNode& node = tree.nodes[i];
      if (!row.known[node.feature]) {
        ++votes[forest.schema.feature_name(node.feature)];
        break;
      }
      i = row.values[node.feature] <= node.threshold ? node.left : node.right;
    }
  }
  return votes;
}

Votes forest_vote(const forest::CohortForest& forest,
                  const forest::EncodedRow& row,
                  const cms::ConceptCatalog& catalog) {
  Votes mapped;
  for (const auto& [concept_id, w] : forest_vote(forest, row)) {
    mapped[catalog.contains(concept_id) ? catalog.question_for(concept_id)
                                        : concept_id] += w;
  }
  return mapped;
}

}  // namespace triage::qseq

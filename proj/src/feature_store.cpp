#include "fstore/feature_store.hpp"

#include "fstore/error.hpp"
#include "fstore/file_util.hpp"

namespace fstore {

namespace fsys = std::filesystem;

void FeatureStore::init(const fsys::path& root) {
  std::error_code ec;
  fsys::create_directories(root, ec);
  if (ec) raise(ErrorKind::StoreIoError, "cannot create " + root.string() + ": " + ec.message());
  if (is_root(root)) return;
  atomic_write_file(root / kMarkerFile, Json{{"format", 1}}.dump(2) + "\n");
}

bool FeatureStore::is_root(const fsys::path& root) { return fsys::is_regular_file(root / kMarkerFile); }

std::optional<fsys::path> FeatureStore::checked(std::optional<fsys::path> root) {
  if (root && !is_root(*root)) raise(ErrorKind::NotFound, root->string() + " is not an initialized feature store");
  return root;
}

FeatureStore::FeatureStore(std::optional<fsys::path> root, const Clock& clock, SchedulerOptions options)
    : root_(checked(std::move(root))),
      registry_(root_),
      offline_(root_),
      online_(root_),
      calculator_(registry_, transforms_, root_ ? *root_ : fsys::current_path()),
      scheduler_(registry_, calculator_, offline_, online_, clock, root_, options),
      retriever_(registry_, offline_, online_, calculator_,
                 [this](const FeatureSetRef& fsv) { return scheduler_.data_state(fsv); }) {}

ConsistencyReport FeatureStore::check_consistency(const FeatureSetRef& fsv, Timestamp now) const {
  FeatureSetSpec spec = registry_.get_feature_set(fsv);
  return fstore::check_consistency(offline_, online_, fsv, now, spec.materialization.ttl);
}

}  // namespace fstore

export {
  CSRMatrix, NDArray, PickleError, decodePickle,
} from "./pickle.js";
export {
  ConvertError, DATASET_NAMES, loadBundle,
  type DatasetName, type PlanetoidBundle,
} from "./bundle.js";
export {
  DATASET_FILES, MANIFEST_FILE, VALIDATION_SIZE,
  assemble, convert, renderFiles, sha256, writeDataset,
  type ConvertedDataset, type SparseRow,
} from "./dataset.js";
export { validateDirectory } from "./validate.js";
export { verifyOutput } from "./verify.js";

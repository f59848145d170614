"""featinvert: invert visual feature descriptors back to natural images.

Paired-dictionary sparse coding recovers one or several diverse images from
a HOG (or pluggable) descriptor; baseline inverters and quantitative
evaluation utilities are included.
"""

from .baselines import (
    EigenBasis,
    EldaDatabase,
    StationaryGaussianModel,
    build_eigen_basis,
    build_elda_database,
    direct_invert,
    elda_invert,
    fit_stationary_gaussian,
    greedy_triangle_invert,
    nudged_invert,
    ridge_invert,
    subset_invert,
)
from .errors import (
    ContractError,
    CorpusError,
    DegenerateInputError,
    FeatInvertError,
    FormatError,
    NumericError,
    ShapeError,
)
from .evaluate import (
    DiversityRecord,
    NccReport,
    diversity_curve,
    diversity_record,
    feature_distance_bins,
    ncc,
    ratio_density,
    recursion_test,
    run_ncc_benchmark,
)
from .features import (
    FeatureDescriptor,
    FeatureExtractor,
    HogExtractor,
    HogParams,
    descriptor_distance,
    hog_extract,
    hog_glyph,
)
from .imaging import (
    ImagePatch,
    LabPatch,
    PatchCorpus,
    lab_distance,
    lab_to_rgb,
    load_image,
    rgb_to_lab,
    sample_patches,
    save_image,
    to_grayscale,
)
from .inversion import (
    AffinityOperator,
    InversionSet,
    build_affinity,
    invert_multiple,
    invert_single,
    invert_weight_template,
    similarity_cost,
)
from .synth import synth_image, synth_image_dir
from .sparse import (
    PairedDictionary,
    QuadraticPenalty,
    SparseCode,
    learn_paired_dictionary,
    solve_elastic,
    solve_lasso,
)

__version__ = "0.1.0"

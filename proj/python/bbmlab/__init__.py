"""Branching Brownian motion laboratory: python face of the C++ core."""

try:
    from ._bbmlab import (
        Forest,
        PointMeasure,
        TestFunction,
        __version__,
        bramson_front,
        cluster_integral,
        cluster_pool,
        ergodic_gap,
        kpp_c,
        load_forest,
        recenter_m,
        simulate,
        tf_library,
    )
except ImportError:  # editable/CMake layouts place the module next to the package
    from _bbmlab import (  # type: ignore[no-redef]
        Forest,
        PointMeasure,
        TestFunction,
        __version__,
        bramson_front,
        cluster_integral,
        cluster_pool,
        ergodic_gap,
        kpp_c,
        load_forest,
        recenter_m,
        simulate,
        tf_library,
    )

__all__ = [
    "Forest",
    "PointMeasure",
    "TestFunction",
    "__version__",
    "bramson_front",
    "cluster_integral",
    "cluster_pool",
    "ergodic_gap",
    "kpp_c",
    "load_forest",
    "recenter_m",
    "simulate",
    "tf_library",
]

"""Input checks shared by the estimator and the simulator."""
import numbers

import numpy as np


def check_probability(value, name, closed=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError("%s must be a finite number" % name)
    ok = 0 <= value <= 1 if closed else 0 < value < 1
    if not ok:
        raise ValueError("%s must be in %s" % (name, "[0,1]" if closed else "(0,1)"))
    return float(value)


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError("%s must be a finite number" % name)
    if (strict and value <= 0) or (not strict and value < 0):
        raise ValueError("%s must be %s" % (name, "> 0" if strict else ">= 0"))
    return float(value)


def check_array(a, shape, name):
    """Convert to a finite float array of the given shape (None = any size)."""
    a = np.asarray(a, dtype=float)
    if len(shape) != a.ndim or any(s is not None and s != d for s, d in zip(shape, a.shape)):
        raise ValueError("%s has shape %s, expected %s" % (name, a.shape, shape))
    if not np.all(np.isfinite(a)):
        raise ValueError("%s contains non-finite values" % name)
    return a


def check_frame(frame, n_robots):
    """Validate one :class:`~mutualloc.estimator.Frame` against the team size."""
    check_positive(frame.dt, "frame.dt")
    check_array(frame.controls, (n_robots, 4), "frame.controls")
    if frame.odometry is not None:
        for z in frame.odometry:
            if not 0 <= z.robot_id < n_robots:
                raise ValueError("odometry robot id %r out of range" % z.robot_id)
    if frame.detections is not None:
        if len(frame.detections) != n_robots:
            raise ValueError("detections must hold one list per robot")
        for i, dets in enumerate(frame.detections):
            for d in dets:
                if d.observer_id != i:
                    raise ValueError("detection filed under robot %d has observer %d"
                                     % (i, d.observer_id))
    return frame

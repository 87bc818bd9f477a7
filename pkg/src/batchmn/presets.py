"""Named scenarios fig1 ... fig12 for the standard experiment sweeps.

Each preset is a flat mapping of CLI option names to string values, exactly
as they would appear in a config file, plus the command it belongs to.
"""


def _fig10_b_grid():
    # keep only b where p = gamma * ceil(400/b) * b is an integer for gamma = 1.2 and 2
    keep = [b for b in range(1, 201) if (-(-400 // b) * b) % 5 == 0]
    picks = [b for b in keep if b <= 10 or b % 5 == 0]
    return ",".join(map(str, picks))


PRESETS = {
    "fig1": {
        "command": "opt-batch", "family": "bmn",
        "gamma-grid": "1.1,1.5,2,3,5,10", "xi-grid": "0.6:0.99:0.01",
    },
    "fig2": {
        "command": "risk-curve",
        "estimators": "mn,bmn:2,bmn:opt,sbmn:opt,sub:opt,ridge:opt",
        "gamma-grid": "1.5", "xi-grid": "0.1:0.95:0.05", "n": "400", "trials": "50",
    },
    "fig3": {
        "command": "opt-batch", "family": "bmn",
        "gamma-grid": "1.1:5:0.1", "xi-grid": "0.5,0.6,0.7,0.8,0.9",
    },
    "fig4": {
        "command": "risk-curve", "estimators": "bmn,sbmn", "b-grid": "2,4",
        "gamma-grid": "0.6:3:0.1", "xi-grid": "0.2,0.6,0.95", "n": "400", "trials": "50",
        "with-theory": "true",
    },
    "fig5": {
        "command": "risk-curve",
        "estimators": "mn,bmn:1,bmn:2,bmn:10,sbmn:1,sbmn:2,sbmn:10",
        "gamma-grid": "0.2:3:0.1", "xi-grid": "0.8", "n": "400", "trials": "50",
        "with-theory": "true",
    },
    "fig6": {
        "command": "opt-batch", "family": "sbmn",
        "gamma-grid": "1.1,1.5,2,3,5,10", "xi-grid": "0.3:0.99:0.01",
    },
    "fig7": {
        "command": "risk-curve", "estimators": "bmn", "b-grid": "1:10:1",
        "gamma-grid": "2", "xi-grid": "0.5,0.6,0.7,0.8,0.9", "n": "1000", "n-rule": "ceil",
        "trials": "50",
    },
    "fig8": {
        "command": "risk-curve",
        "estimators": "mn,bmn:2,bmn:opt,sbmn:opt,sub:opt,ridge:opt",
        "gamma-grid": "1.1:4:0.1", "xi-grid": "0.7", "n": "400", "trials": "50",
    },
    "fig9": {
        "command": "risk-curve", "estimators": "bmn,sbmn,avg", "b-grid": "2,200",
        "gamma-grid": "0.6:3:0.1", "xi-grid": "0.7,0.75", "n": "400", "trials": "50",
        "with-theory": "true",
    },
    "fig10": {
        "command": "risk-curve", "estimators": "bmn,sbmn,avg", "b-grid": _fig10_b_grid(),
        "gamma-grid": "1.2,2", "xi-grid": "0.6", "n": "400", "n-rule": "ceil", "trials": "50",
    },
    "fig11": {
        "command": "risk-curve", "estimators": "bmn:opt,sbmn:opt,avg:opt",
        "gamma-grid": "1.1:4:0.1", "xi-grid": "0.3,0.6,0.8", "n": "400", "trials": "50",
    },
    "fig12": {
        "command": "risk-curve", "estimators": "bmn:4,ibmn:2x2,bmn:6,ibmn:3x2",
        "gamma-grid": "0.5:4:0.25", "xi-grid": "0.8", "n": "396", "trials": "100",
    },
}

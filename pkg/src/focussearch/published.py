"""Published autofocus comparison results for the five KAO star-cluster runs.

Each sequence maps algorithm -> (steps, accuracy error µm, reported score).
``OVERALL`` holds the reported per-algorithm averages.
"""

SEQUENCES = ("M103", "N6793", "N7067", "N7788", "N7789")

RESULTS = {
    "M103": {
        "Binary": (17, 162, 1.5294),
        "Modified Fast Climbing": (12, 302, 1.1623),
        "Fibonacci": (10, 363, 1.1603),
        "Subbarao-Binary": (26, 167, 0.9701),
        "Subbarao-Fibonacci": (17, 351, 0.7059),
        "Global": (2, 3800, 0.5542),
    },
    "N6793": {
        "Binary": (18, 94, 1.4894),
        "Subbarao-Binary": (24, 90, 1.1667),
        "Modified Fast Climbing": (13, 207, 0.9365),
        "Fibonacci": (10, 437, 0.5767),
        "Subbarao-Fibonacci": (17, 438, 0.3384),
        "Global": (28, 400, 0.225),
    },
    "N7067": {
        "Binary": (15, 85, 1.5059),
        "Subbarao-Binary": (24, 80, 1.0),
        "Fibonacci": (9, 737, 0.2895),
        "Global": (3, 2600, 0.2462),
        "Subbarao-Fibonacci": (17, 553, 0.2042),
        "Modified Fast Climbing": (15, 673, 0.1902),
    },
    "N7788": {
        "Fibonacci": (10, 135, 1.7067),
        "Binary": (15, 101, 1.5208),
        "Subbarao-Binary": (24, 96, 1.0),
        "Subbarao-Fibonacci": (17, 143, 0.9478),
        "Modified Fast Climbing": (11, 239, 0.8764),
        "Global": (2, 2900, 0.3972),
    },
    "N7789": {
        "Fibonacci": (10, 39, 2.6),
        "Subbarao-Fibonacci": (18, 44, 1.2803),
        "Modified Fast Climbing": (13, 78, 1.0),
        "Binary": (17, 110, 0.5422),
        "Subbarao-Binary": (26, 105, 0.3714),
        "Global": (3, 3400, 0.0994),
    },
}

OVERALL = {
    "Binary": 1.3175,
    "Fibonacci": 1.2666,
    "Subbarao-Binary": 0.9016,
    "Modified Fast Climbing": 0.8331,
    "Subbarao-Fibonacci": 0.6953,
    "Global": 0.3044,
}

# Reported focuser grid step for every run.
STEP_UM = 100.0


def recompute():
    """Re-score every published table from its (steps, error) columns.

    Returns ``(tables, summary, cell_deviation, overall_deviation)`` where the
    deviations are the largest absolute differences from the reported
    per-table scores and overall averages.
    """
    from .evaluation import overall_summary, score_table

    tables = []
    cell_dev = 0.0
    for seq in SEQUENCES:
        rows = [(name, s, a) for name, (s, a, _) in RESULTS[seq].items()]
        table = score_table(rows, seq)
        for row in table.rows:
            reported = RESULTS[seq][row.algorithm_name][2]
            cell_dev = max(cell_dev, abs(row.score - reported))
        tables.append(table)
    summary = overall_summary(tables)
    overall_dev = max(abs(r.overall_score - OVERALL[r.algorithm_name]) for r in summary)
    return tables, summary, cell_dev, overall_dev

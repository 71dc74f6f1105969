"""dtkit: firm-year digital-technology adoption indicators from annual-report
text, with the panel econometrics to analyze them.

Pipeline: filing manifest -> section extraction -> sentence segmentation ->
keyword matching -> annotation pools -> classification -> firm-year indicators
-> fixed-effects / IV / quantile regressions.
"""

__version__ = "0.1.0"

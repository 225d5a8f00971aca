from django.urls import path

from simulations.views import (
    RunComparisonView,
    ScenarioRunListView,
    ScenarioRunRetrieveView,
    ScenarioRunView,
    ScenarioValidationView,
)

urlpatterns = [
    path("scenarios/validate/", ScenarioValidationView.as_view(), name="scenario-validate"),
    path("scenarios/run/", ScenarioRunView.as_view(), name="scenario-run"),
    path("runs/", ScenarioRunListView.as_view(), name="scenario-run-list"),
    path("runs/<int:pk>/", ScenarioRunRetrieveView.as_view(), name="scenario-run-detail"),
    path("runs/compare/", RunComparisonView.as_view(), name="run-compare"),
]

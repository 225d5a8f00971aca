# pyright: reportMissingImports=false
from __future__ import annotations

import logging

from drf_spectacular.utils import OpenApiExample, OpenApiResponse, extend_schema
from rest_framework import status
from rest_framework.exceptions import NotFound
from rest_framework.generics import ListAPIView, RetrieveAPIView
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.views import APIView

from simulations.exceptions import RunDirectoryBusyError, ScenarioConfigError, SimulationError
from simulations.models import ScenarioRun
from simulations.serializers import (
    RunComparisonSerializer,
    ScenarioRequestSerializer,
    ScenarioRunRequestSerializer,
    ScenarioRunSerializer,
    ScenarioRunSummarySerializer,
)
from simulations.services.run_comparison import compare_manifests, table_to_records
from simulations.services.scenario_config import validate_config, validate_mapping
from simulations.services.scenario_runner import ScenarioRun as ScenarioPipeline
from simulations.utils import save_scenario_run

logger = logging.getLogger(__name__)


def _config_from_request(data):
    scenario = data["scenario"]
    loader = validate_config if isinstance(scenario, str) else validate_mapping
    return loader(scenario, data.get("overrides") or [], data.get("snapshot_times"))


def _config_errors(exc: ScenarioConfigError) -> Response:
    return Response({"valid": False, "errors": exc.errors}, status=status.HTTP_400_BAD_REQUEST)


class ScenarioValidationView(APIView):
    permission_classes = [AllowAny]

    @extend_schema(
        request=ScenarioRequestSerializer,
        responses={
            200: OpenApiResponse(description="Resolved scenario with every default filled in"),
            400: OpenApiResponse(
                description="Every validation problem as dotted.path: message",
                examples=[
                    OpenApiExample(
                        "InvalidScenario",
                        value={
                            "valid": False,
                            "errors": [
                                "grid: Field required",
                                "collision.t_s: 700.0 fs is after evolution.t_end (660.0 fs)",
                            ],
                        },
                    )
                ],
            ),
        },
    )
    def post(self, request, *args, **kwargs):
        serializer = ScenarioRequestSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        try:
            config = _config_from_request(serializer.validated_data)
        except ScenarioConfigError as exc:
            return _config_errors(exc)
        return Response({"valid": True, "scenario": config.resolved()}, status=status.HTTP_200_OK)


class ScenarioRunView(APIView):
    """Run a scenario synchronously and return its manifest."""

    permission_classes = [AllowAny]

    @extend_schema(
        request=ScenarioRunRequestSerializer,
        responses={
            200: OpenApiResponse(description="Run manifest; run_id is set when the run was saved"),
            400: OpenApiResponse(description="Scenario failed validation"),
            409: OpenApiResponse(description="Another run is writing to the same output directory"),
            422: OpenApiResponse(description="Valid scenario that failed while running"),
        },
    )
    def post(self, request, *args, **kwargs):
        serializer = ScenarioRunRequestSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        try:
            config = _config_from_request(serializer.validated_data)
        except ScenarioConfigError as exc:
            return _config_errors(exc)

        pipeline = ScenarioPipeline(config)
        try:
            manifest = pipeline.run()
        except RunDirectoryBusyError as exc:
            return Response(
                {"error": type(exc).__name__, "stage": pipeline.stage, "message": str(exc)},
                status=status.HTTP_409_CONFLICT,
            )
        except SimulationError as exc:
            logger.warning("Scenario %r failed during %s: %s", config.name, pipeline.stage, exc)
            return Response(
                {"error": type(exc).__name__, "stage": pipeline.stage, "message": str(exc)},
                status=status.HTTP_422_UNPROCESSABLE_ENTITY,
            )

        payload = {"run_id": None, "manifest": manifest.to_representation()}
        if serializer.validated_data["save_run"]:
            payload["run_id"] = save_scenario_run(config, manifest, pipeline.directory).id
        return Response(payload, status=status.HTTP_200_OK)


class ScenarioRunListView(ListAPIView):
    """List all stored runs."""

    queryset = ScenarioRun.objects.all()
    serializer_class = ScenarioRunSummarySerializer
    permission_classes = [AllowAny]

    @extend_schema(
        description="Retrieve the stored runs, newest first.",
        responses={200: ScenarioRunSummarySerializer(many=True)},
    )
    def get(self, request, *args, **kwargs):
        return super().get(request, *args, **kwargs)


class ScenarioRunRetrieveView(RetrieveAPIView):
    """Retrieve a stored run with its manifest and file index."""

    queryset = ScenarioRun.objects.prefetch_related("artifacts").all()
    serializer_class = ScenarioRunSerializer
    permission_classes = [AllowAny]
    lookup_field = "pk"

    @extend_schema(
        description="Retrieve a stored run by its ID.",
        responses={
            200: ScenarioRunSerializer,
            404: OpenApiResponse(description="Run not found"),
        },
    )
    def get(self, request, *args, **kwargs):
        return super().get(request, *args, **kwargs)


class RunComparisonView(APIView):
    permission_classes = [AllowAny]

    @extend_schema(
        request=RunComparisonSerializer,
        responses={
            200: OpenApiResponse(
                description="One record per run (decomposition) or per snapshot time (negativity)",
                examples=[
                    OpenApiExample(
                        "DecompositionComparison",
                        value={
                            "field": "decomposition",
                            "rows": [
                                {"run": "he_double_barrier (he)", "positive": 1.025, "negative": -0.025, "total": 1.0, "weight": 0.012},
                                {"run": "gs_double_barrier (gs)", "positive": 1.0, "negative": 0.0, "total": 1.0, "weight": None},
                            ],
                        },
                    )
                ],
            ),
            404: OpenApiResponse(description="A run ID does not exist"),
        },
    )
    def post(self, request, *args, **kwargs):
        serializer = RunComparisonSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        run_ids = serializer.validated_data["run_ids"]
        field = serializer.validated_data["field"]

        runs = {run.id: run for run in ScenarioRun.objects.filter(id__in=run_ids)}
        missing = [run_id for run_id in run_ids if run_id not in runs]
        if missing:
            raise NotFound(f"Runs not found: {missing}")

        frame = compare_manifests([runs[run_id].manifest_json for run_id in run_ids], field)
        return Response({"field": field, "rows": table_to_records(frame)}, status=status.HTTP_200_OK)

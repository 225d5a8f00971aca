from django.http import JsonResponse
from django.views.decorators.http import require_GET

from simulations.services.units import DEFAULT_UNITS


@require_GET
def healthz(_request):
    return JsonResponse(
        {
            "status": "ok",
            "kinetic_prefactor_ev_nm2": round(DEFAULT_UNITS.kinetic_prefactor(1.0), 6),
        }
    )

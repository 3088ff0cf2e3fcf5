from django.urls import include, path
from rest_framework.routers import DefaultRouter

from . import views

app_name = 'experiments'

router = DefaultRouter()
router.register('runs', views.ExperimentRunViewSet, basename='run')

urlpatterns = [
    path('', include(router.urls)),
]

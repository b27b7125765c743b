mod common;

use std::time::{Duration, Instant};

use common::{closed_port, Reply, StubServer};
use serde_json::json;
use studio_core::backends::{GenerationRequest, HttpGenerator, HttpInpainter, ImageGenerator, InpaintRequest, Inpainter};
use studio_core::codec;
use studio_core::model::{BinaryMask, MaskSeed, RasterImage};
use studio_core::refinement::{LlmRefiner, RefineError, Refiner, RefinementRequest, INSTRUCTION, MAX_PROMPT_CHARS};
use studio_core::remote::{BackendError, Endpoint};
use studio_core::scoring::{Embedder, HttpEmbedder, ScoreError};
use studio_core::segmentation::{dilate, HttpSegmenter, SegmentError, Segmenter};

fn endpoint(url: String) -> Endpoint {
    Endpoint::new(url, Duration::from_secs(5))
}

fn png_b64(image: &RasterImage) -> String {
    codec::to_base64(&codec::encode_png(image))
}

fn mask_b64(mask: &BinaryMask) -> String {
    codec::to_base64(&codec::encode_mask_png(mask))
}

fn test_image(w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| [(x * 7) as u8, (y * 5) as u8, 90]).unwrap()
}

#[test]
fn segmenter_returns_the_service_mask() {
    // the stub answers with the seed's box as a mask
    let stub = StubServer::start(|req| {
        let body = req.json();
        let b: Vec<u32> = serde_json::from_value(body["seed"]["box"].clone()).unwrap();
        let mask = BinaryMask::from_fn(20, 10, |x, y| x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3]).unwrap();
        Reply::Json(200, json!({ "mask": mask_b64(&mask) }).to_string())
    });
    let seg = HttpSegmenter::new(endpoint(stub.url("/segment")));
    let mask = seg.segment(&test_image(20, 10), &MaskSeed::bbox(2, 3, 5, 4)).unwrap();
    assert_eq!(mask.area(), 8);
    assert_eq!(mask.bounding_box(), Some(studio_core::model::PixelBox::new(2, 3, 5, 4)));

    let req = stub.next_request();
    assert_eq!(req.path, "/segment");
    let sent = codec::decode_png(&codec::from_base64(req.json()["image"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(sent, test_image(20, 10));
    assert_eq!(req.json()["seed"]["kind"], "box");
}

#[test]
fn segmenter_rejects_wrong_dimensions_and_bad_values() {
    let stub = StubServer::start(|_| {
        Reply::Json(200, json!({ "mask": mask_b64(&BinaryMask::full(8, 8).unwrap()) }).to_string())
    });
    let seg = HttpSegmenter::new(endpoint(stub.url("/")));
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(1, 1)).unwrap_err();
    assert_eq!(
        err,
        SegmentError::Backend(BackendError::DimensionMismatch { expected: (20, 10), actual: (8, 8) })
    );

    // grayscale with a value other than 0/255
    let stub = StubServer::start(|_| {
        let gray = image::GrayImage::from_pixel(20, 10, image::Luma([128]));
        let mut bytes = Vec::new();
        gray.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png).unwrap();
        Reply::Json(200, json!({ "mask": codec::to_base64(&bytes) }).to_string())
    });
    let seg = HttpSegmenter::new(endpoint(stub.url("/")));
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(1, 1)).unwrap_err();
    assert!(matches!(err, SegmentError::Backend(BackendError::Malformed(_))), "{err:?}");
}

#[test]
fn segmenter_validates_seed_before_calling() {
    let seg = HttpSegmenter::new(endpoint(format!("http://{}/", closed_port())));
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(20, 0)).unwrap_err();
    assert!(matches!(err, SegmentError::SeedOutOfBounds(_)));
}

#[test]
fn unreachable_and_slow_services_are_unavailable() {
    let seg = HttpSegmenter::new(endpoint(format!("http://{}/", closed_port())));
    assert!(!seg.probe());
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(1, 1)).unwrap_err();
    assert!(matches!(err, SegmentError::Backend(BackendError::Unavailable(_))));

    let stub = StubServer::start(|_| Reply::Hang);
    let seg = HttpSegmenter::new(Endpoint::new(stub.url("/"), Duration::from_millis(300)));
    assert!(seg.probe());
    let started = Instant::now();
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(1, 1)).unwrap_err();
    assert!(matches!(err, SegmentError::Backend(BackendError::Unavailable(_))), "{err:?}");
    assert!(started.elapsed() < Duration::from_secs(5));

    let stub = StubServer::start(|_| Reply::Json(503, "{}".into()));
    let seg = HttpSegmenter::new(endpoint(stub.url("/")));
    let err = seg.segment(&test_image(20, 10), &MaskSeed::point(1, 1)).unwrap_err();
    assert!(matches!(err, SegmentError::Backend(BackendError::Unavailable(_))));
}

fn refine_request() -> RefinementRequest {
    RefinementRequest::new("a fantasy world where a river is made of dark chocolate", "river of dark chocolate")
}

#[test]
fn llm_refiner_sends_instruction_and_takes_first_line() {
    let stub = StubServer::start(|req| {
        let user = req.json()["user"].as_str().unwrap().to_owned();
        Reply::Json(200, json!({ "text": format!("\n  {}\nsecond line", user.replace('\n', " | ")) }).to_string())
    });
    let refiner = LlmRefiner::new(endpoint(stub.url("/v1/refine")));
    let out = refiner.refine(&refine_request()).unwrap();
    assert_eq!(
        out,
        "Scene prompt: a fantasy world where a river is made of dark chocolate | Target object: river of dark chocolate"
    );
    let req = stub.next_request();
    assert_eq!(req.json()["system"], INSTRUCTION);
    assert!(req.json()["max_tokens"].as_u64().unwrap() > 0);
    assert_eq!(refiner.id(), format!("http:{}", stub.url("/v1/refine")));
}

#[test]
fn llm_refiner_empty_and_oversized_replies() {
    let stub = StubServer::start(|_| Reply::Json(200, json!({ "text": "  \n\t " }).to_string()));
    let refiner = LlmRefiner::new(endpoint(stub.url("/")));
    assert_eq!(refiner.refine(&refine_request()).unwrap_err(), RefineError::EmptyRefinement);

    let stub = StubServer::start(|_| Reply::Json(200, json!({ "text": "z".repeat(1000) }).to_string()));
    let refiner = LlmRefiner::new(endpoint(stub.url("/")));
    assert_eq!(refiner.refine(&refine_request()).unwrap().chars().count(), MAX_PROMPT_CHARS);

    let stub = StubServer::start(|_| Reply::Json(200, "not json".into()));
    let refiner = LlmRefiner::new(endpoint(stub.url("/")));
    assert!(matches!(refiner.refine(&refine_request()), Err(RefineError::Backend(BackendError::Malformed(_)))));

    let refiner = LlmRefiner::new(endpoint(format!("http://{}/", closed_port())));
    assert!(matches!(refiner.refine(&refine_request()), Err(RefineError::Backend(BackendError::Unavailable(_)))));
}

#[test]
fn api_key_is_sent_as_bearer_token() {
    std::env::set_var("STUDIO_TEST_LLM_KEY", "sekrit");
    let stub = StubServer::start(|_| Reply::Json(200, json!({ "text": "ok" }).to_string()));
    let refiner = LlmRefiner::new(endpoint(stub.url("/")).with_api_key_env("STUDIO_TEST_LLM_KEY"));
    refiner.refine(&refine_request()).unwrap();
    assert_eq!(stub.next_request().header("authorization"), Some("Bearer sekrit"));
}

#[test]
fn http_generator_checks_dimensions() {
    let stub = StubServer::start(|req| {
        let body = req.json();
        let (w, h) = (body["width"].as_u64().unwrap() as u32, body["height"].as_u64().unwrap() as u32);
        Reply::Json(200, json!({ "image": png_b64(&test_image(w, h)) }).to_string())
    });
    let generator = HttpGenerator::new(endpoint(stub.url("/")));
    let image = generator.generate(&GenerationRequest::new("blue bananas", 1, 24, 16).unwrap()).unwrap();
    assert_eq!(image, test_image(24, 16));
    let body = stub.next_request().json();
    assert_eq!(body["prompt"], "blue bananas");
    assert_eq!(body["seed"], 1);

    let stub = StubServer::start(|_| Reply::Json(200, json!({ "image": png_b64(&test_image(16, 16)) }).to_string()));
    let generator = HttpGenerator::new(endpoint(stub.url("/")));
    let err = generator.generate(&GenerationRequest::new("x", 1, 24, 16).unwrap()).unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)));
}

#[test]
fn misbehaving_inpaint_service_cannot_touch_pixels_outside_the_band() {
    // the service repaints the whole frame black
    let stub = StubServer::start(|_| {
        Reply::Json(200, json!({ "image": png_b64(&RasterImage::filled(32, 32, [0, 0, 0]).unwrap()) }).to_string())
    });
    let inpainter = HttpInpainter::new(endpoint(stub.url("/")));
    let original = RasterImage::filled(32, 32, [200, 210, 220]).unwrap();
    let mask = BinaryMask::from_fn(32, 32, |x, y| (10..20).contains(&x) && (10..20).contains(&y)).unwrap();
    let request = InpaintRequest::new(original.clone(), mask.clone(), "blue bananas", 3).with_feather_radius(3);
    let out = inpainter.inpaint(&request).unwrap();

    let band = dilate(&mask, 3);
    for y in 0..32 {
        for x in 0..32 {
            if !band.get(x, y) {
                assert_eq!(out.get(x, y), original.get(x, y), "({x},{y})");
            }
        }
    }
    assert_eq!(out.get(15, 15), [0, 0, 0]);
    let body = stub.next_request().json();
    let sent_mask = codec::decode_mask_png(&codec::from_base64(body["mask"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(sent_mask, mask);
    assert_eq!(body["prompt"], "blue bananas");
}

#[test]
fn http_embedder_normalizes_and_rejects_bad_vectors() {
    let stub = StubServer::start(|req| {
        let v = if req.json().get("text").is_some() { json!([3.0, 4.0]) } else { json!([0.0, 2.0]) };
        Reply::Json(200, json!({ "embedding": v }).to_string())
    });
    let embedder = HttpEmbedder::new(endpoint(stub.url("/")));
    assert_eq!(embedder.embed_text("x").unwrap().as_slice(), &[0.6, 0.8]);
    assert_eq!(embedder.embed_image(&test_image(4, 4)).unwrap().as_slice(), &[0.0, 1.0]);

    let stub = StubServer::start(|_| Reply::Json(200, json!({ "embedding": [0.0, 0.0, 0.0] }).to_string()));
    let embedder = HttpEmbedder::new(endpoint(stub.url("/")));
    assert!(matches!(embedder.embed_text("x"), Err(ScoreError::Backend(BackendError::Malformed(_)))));
}
